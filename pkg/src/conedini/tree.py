"""Finite trees of dyadic cubes, bad cubes, localization and graph drawing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .annulus import annulus_pairs, rule_for
from .defect import level_defects
from .dyadic import DyadicCube
from .errors import ContractViolation, InputError
from .geometry import Cone
from .lipgraph import LipGraphPatch, verify_cone_condition
from .measure import AtomicMeasure


class CubeTree:
    """An ancestor-closed family of dyadic cubes under a single top cube.

    Level i holds cubes of generation ``top.k + i``; levels are kept in
    lexicographic order of lattice coordinates.  ``depth`` may exceed the
    last nonempty level, in which case the deeper levels are empty and the
    tree has no leaves.
    """

    def __init__(self, top: DyadicCube, levels, depth: int | None = None):
        levels = [sorted({tuple(c.j) if isinstance(c, DyadicCube) else tuple(c) for c in lev}) for lev in levels]
        if depth is None:
            depth = len(levels) - 1
        if depth < 0:
            raise InputError("tree depth must be nonnegative")
        levels = levels + [[] for _ in range(depth + 1 - len(levels))]
        if len(levels) > depth + 1:
            raise InputError("more levels than the stated depth")
        if levels[0] != [top.j]:
            raise InputError("level 0 must consist of the top cube alone")
        sets = [set(lev) for lev in levels]
        for i in range(1, depth + 1):
            for j in levels[i]:
                if len(j) != top.n:
                    raise InputError("cube dimension differs from the top cube")
                if tuple(v >> 1 for v in j) not in sets[i - 1]:
                    raise InputError(f"cube {j} at level {i} has no parent in the tree")
        self.top = top
        self.depth = depth
        self._levels = levels
        self._sets = sets

    @classmethod
    def full(cls, top: DyadicCube, depth: int) -> CubeTree:
        levels = [[top]]
        for _ in range(depth):
            levels.append([c for Q in levels[-1] for c in Q.children()])
        return cls(top, levels, depth)

    @classmethod
    def support(cls, mu: AtomicMeasure, top: DyadicCube, depth: int) -> CubeTree:
        """All cubes under ``top`` down to ``depth`` levels that carry positive mass."""
        levels = []
        idx = mu.atoms_in(top)
        for i in range(depth + 1):
            cells = mu.level(top.k + i).cells[mu.level(top.k + i).atom_cell[idx]] if len(idx) else []
            levels.append([tuple(c) for c in np.asarray(cells).tolist()])
        if not levels[0]:
            levels[0] = [top.j]
        return cls(top, levels, depth)

    @classmethod
    def from_cubes(cls, top: DyadicCube, cubes, depth: int | None = None) -> CubeTree:
        """The smallest tree under ``top`` containing the given cubes."""
        cubes = list(cubes)
        if depth is None:
            depth = max([Q.k - top.k for Q in cubes] + [0])
        levels = [set() for _ in range(depth + 1)]
        levels[0].add(top.j)
        for Q in cubes:
            if not top.contains(Q) or Q.k - top.k > depth:
                raise InputError(f"{Q} does not lie under {top} within depth {depth}")
            while Q.k > top.k:
                levels[Q.k - top.k].add(Q.j)
                Q = Q.parent()
        return cls(top, levels, depth)

    def generation(self, i: int) -> int:
        return self.top.k + i

    def level(self, i: int) -> list[DyadicCube]:
        g = self.generation(i)
        return [DyadicCube(g, j) for j in self._levels[i]]

    def level_coords(self, i: int) -> np.ndarray:
        return np.array(self._levels[i], dtype=np.int64).reshape(-1, self.top.n)

    def __contains__(self, Q: DyadicCube) -> bool:
        i = Q.k - self.top.k
        return 0 <= i <= self.depth and Q.j in self._sets[i]

    def __iter__(self):
        for i in range(self.depth + 1):
            yield from self.level(i)

    def __len__(self):
        return sum(len(lev) for lev in self._levels)

    def __eq__(self, other):
        return isinstance(other, CubeTree) and self.top == other.top and self._levels == other._levels

    def children_of(self, Q: DyadicCube) -> list[DyadicCube]:
        return [c for c in Q.children() if c in self]

    def leaves(self) -> set[DyadicCube]:
        return set(self.level(self.depth))

    def prune(self, Q: DyadicCube) -> CubeTree:
        """Remove Q and all of its descendants."""
        if Q == self.top:
            raise InputError("cannot prune the top cube")
        keep = [[j for j in lev if not Q.contains(DyadicCube(self.generation(i), j))]
                for i, lev in enumerate(self._levels)]
        return CubeTree(self.top, keep, self.depth)

    def restricted(self, keep) -> CubeTree | None:
        """Subtree of cubes for which ``keep(Q)`` holds along the whole ancestry; None if top fails."""
        if not keep(self.top):
            return None
        levels = [[self.top.j]]
        for i in range(1, self.depth + 1):
            prev = set(levels[-1])
            g = self.generation(i)
            levels.append([j for j in self._levels[i]
                           if tuple(v >> 1 for v in j) in prev and keep(DyadicCube(g, j))])
        return CubeTree(self.top, levels, self.depth)

    def without_null(self, mu: AtomicMeasure) -> CubeTree | None:
        """Delete mu-null cubes (and so their descendants)."""
        return self.restricted(lambda Q: mu.mass(Q) > 0)

    def to_dict(self):
        return {"top": self.top.to_dict(), "depth": self.depth,
                "levels": [[list(j) for j in lev] for lev in self._levels]}

    def __repr__(self):
        return f"CubeTree(top={self.top}, depth={self.depth}, cubes={len(self)})"


def leaves(T: CubeTree) -> set[DyadicCube]:
    """Deepest level of the tree, the finite-depth stand-in for Leaves(T)."""
    return T.leaves()


def _bad_indices(T: CubeTree, X: Cone, i: int) -> np.ndarray:
    if i == 0:
        return np.empty(0, dtype=np.int64)
    pairs = annulus_pairs(T.level_coords(i), rule_for(X))
    return np.unique(pairs.reshape(-1))


def bad_cubes(T: CubeTree, X: Cone) -> set[DyadicCube]:
    """Cubes R of T lying in Delta*_{Q,X} for some Q of T (necessarily of the same level)."""
    out = set()
    for i in range(1, T.depth + 1):
        cubes = T.level(i)
        out.update(cubes[t] for t in _bad_indices(T, X, i))
    return out


class Redistribution(NamedTuple):
    lhs: float
    rhs: float


def _level_defect_masses(T: CubeTree, mu: AtomicMeasure, X: Cone, i: int):
    """(Defect * mu, mu) for each cube of level i, in level order."""
    g = T.generation(i)
    lev = mu.level(g)
    defects = level_defects(mu, X, g)
    dm, ms = [], []
    for j in T._levels[i]:
        idx = lev.lookup.get(j)
        if idx is None:
            dm.append(0.0)
            ms.append(0.0)
        else:
            dm.append(float(defects[idx] * lev.masses[idx]))
            ms.append(float(lev.masses[idx]))
    return np.array(dm), np.array(ms)


def redistribution_check(T: CubeTree, mu: AtomicMeasure, X: Cone, i: int) -> Redistribution:
    """Both sides of: sum of mu(R) over bad R in T_i <= sum over Q in T_i of Defect(mu,Q,X) mu(Q).

    mu-null cubes are deleted from the tree first; the inequality needs every
    witness Q to carry mass.
    """
    if i < 1:
        raise InputError("redistribution is stated for levels i >= 1")
    T = T.without_null(mu)
    if T is None or i > T.depth:
        return Redistribution(0.0, 0.0)
    dm, ms = _level_defect_masses(T, mu, X, i)
    bad = _bad_indices(T, X, i)
    return Redistribution(math.fsum(ms[bad]), math.fsum(dm))


def equitable_shares(T: CubeTree, mu: AtomicMeasure, X: Cone, i: int) -> dict:
    """Mass of bad cubes of level i handed to the cubes that see them.

    Each bad R gives Q in nabla*_{R,X} (within the tree) the share
    mu(R) mu(Q) / mu(union of those Q).  Shares add up to the bad mass, and
    the share of Q never exceeds Defect(mu,Q,X) mu(Q).
    """
    T = T.without_null(mu)
    if T is None or i < 1 or i > T.depth:
        return {}
    _, ms = _level_defect_masses(T, mu, X, i)
    pairs = annulus_pairs(T.level_coords(i), rule_for(X))
    # seers[R] = cubes Q of the level with R in Delta*_Q (symmetric rule)
    seers: dict[int, list[int]] = {}
    for a, b in pairs.tolist():
        seers.setdefault(a, []).append(b)
        seers.setdefault(b, []).append(a)
    cubes = T.level(i)
    shares: dict[DyadicCube, list[float]] = {}
    for r, qs in seers.items():
        pool = math.fsum(ms[qs])
        for q in qs:
            shares.setdefault(cubes[q], []).append(ms[r] * ms[q] / pool)
    return {Q: math.fsum(v) for Q, v in shares.items()}


@dataclass
class GoodBadPartition:
    good: CubeTree | None
    bad: set
    N: float
    eps: float
    in_A: np.ndarray = field(repr=False)
    mass_A: float = 0.0
    degenerate: bool = False
    checks: dict = field(default_factory=dict)


def _atom_sums(T: CubeTree, b, mu: AtomicMeasure, idx):
    """S_{T,b} at the given atoms (atoms have positive mass, so no 1/0 terms arise)."""
    sums = np.zeros(len(idx))
    terms = [[] for _ in idx]
    for i in range(T.depth + 1):
        g = T.generation(i)
        lev = mu.level(g)
        cells = lev.cells[lev.atom_cell[idx]]
        for t, (j, cell) in enumerate(zip(cells.tolist(), lev.atom_cell[idx].tolist())):
            Q = DyadicCube(g, tuple(j))
            bq = float(b.get(Q, 0.0))
            if bq and Q in T:
                terms[t].append(bq / float(lev.masses[cell]))
    for t, row in enumerate(terms):
        sums[t] = math.fsum(row)
    return sums


def _in_level(T: CubeTree, mu: AtomicMeasure, idx, i: int, tree: CubeTree | None = None):
    tree = T if tree is None else tree
    lev = mu.level(T.generation(i))
    cells = lev.cells[lev.atom_cell[idx]].tolist()
    return np.array([tuple(c) in tree._sets[i] for c in cells], dtype=bool)


def check_localization(part: GoodBadPartition, T: CubeTree, b, mu: AtomicMeasure, slack: float = 1e-12) -> dict:
    """Evaluate the four localization properties directly."""
    good = part.good
    cubes = list(T)
    good_set = set(good) if good is not None else set()
    p1 = good is None or (good.top == T.top and all(Q.k == T.top.k or Q.parent() in good_set for Q in good_set))
    p1 = p1 and good_set.isdisjoint(part.bad) and len(good_set) + len(part.bad) == len(cubes)
    p2 = all(c in part.bad for P in part.bad for c in T.children_of(P))
    top_atoms = mu.atoms_in(T.top)
    A = part.in_A[top_atoms]
    if good is not None and len(top_atoms):
        in_leaves = _in_level(T, mu, top_atoms, T.depth, good)
    else:
        in_leaves = np.zeros(len(top_atoms), dtype=bool)
    w = mu.weights[top_atoms]
    lhs = math.fsum(w[A & in_leaves])
    rhs = (1 - part.eps * mu.mass(T.top)) * part.mass_A
    p3 = lhs >= rhs - slack * max(part.mass_A, 1.0)
    total_b = math.fsum(float(b.get(Q, 0.0)) for Q in good_set)
    p4 = total_b < part.N / part.eps
    return {"tree": bool(p1), "child_closed": bool(p2), "leaf_mass": bool(p3), "finite_sum": bool(p4)}


def localize(T: CubeTree, b, mu: AtomicMeasure, N: float, eps: float) -> GoodBadPartition:
    """Split T into good and bad cubes by a density stopping time.

    A is the set of atoms in the leaves of T with S_{T,b} <= N.  With
    tau = eps * mu(A), a cube is good when it and all of its ancestors P
    satisfy mu(P cap A) > tau mu(P) and mu(P cap A) > 0.  The four
    localization properties are then checked; a failure raises
    :class:`ContractViolation`.
    """
    if not (N > 0 and eps > 0):
        raise InputError("N and eps must be positive")
    top_atoms = mu.atoms_in(T.top)
    in_A = np.zeros(len(mu), dtype=bool)
    if len(top_atoms):
        sums = _atom_sums(T, b, mu, top_atoms)
        in_A[top_atoms] = (sums <= N) & _in_level(T, mu, top_atoms, T.depth)
    mass_A = math.fsum(mu.weights[in_A])
    cubes = list(T)
    if mass_A == 0:
        # nothing to localize: keep the whole tree when its b-sum allows, else nothing
        if math.fsum(float(b.get(Q, 0.0)) for Q in cubes) < N / eps:
            part = GoodBadPartition(T, set(), N, eps, in_A, 0.0, degenerate=True)
        else:
            part = GoodBadPartition(None, set(cubes), N, eps, in_A, 0.0, degenerate=True)
    else:
        tau = eps * mass_A
        a_mass = {}
        for i in range(T.depth + 1):
            g = T.generation(i)
            lev = mu.level(g)
            idx = np.flatnonzero(in_A)
            cells = lev.cells[lev.atom_cell[idx]].tolist()
            groups: dict[tuple, list] = {}
            for c, w in zip(cells, mu.weights[idx].tolist()):
                groups.setdefault((g, tuple(c)), []).append(w)
            for key, ws in groups.items():
                a_mass[key] = math.fsum(ws)

        def ok(Q):
            ma = a_mass.get((Q.k, Q.j), 0.0)
            return ma > 0 and ma > tau * mu.mass(Q)

        good = T.restricted(ok)
        good_set = set(good) if good is not None else set()
        part = GoodBadPartition(good, {Q for Q in cubes if Q not in good_set}, N, eps, in_A, mass_A)
    part.checks = check_localization(part, T, b, mu)
    if not all(part.checks.values()):
        raise ContractViolation(f"localization properties failed: {part.checks}")
    return part


class ExtractedPatch(NamedTuple):
    patch: LipGraphPatch
    covered_mass: float
    atoms: np.ndarray
    top: DyadicCube


@dataclass
class Extraction:
    """Lipschitz graph patches drawn through the leaves of a tree."""

    patches: list
    i0: int
    tail_achieved: bool
    leaf_mass: float
    covered_mass: float
    split: int = 0

    def __iter__(self):
        return iter([(p.patch, p.covered_mass) for p in self.patches])

    def __len__(self):
        return len(self.patches)

    @property
    def covered_fraction(self) -> float:
        return self.covered_mass / self.leaf_mass if self.leaf_mass else 0.0


def _split_compatible(points, subspace, alpha):
    """Greedy partition of points into groups that each satisfy the cone condition."""
    groups: list[list[int]] = []
    for t, p in enumerate(points):
        for grp in groups:
            if verify_cone_condition(points[grp + [t]], subspace, alpha).ok:
                grp.append(t)
                break
        else:
            groups.append([t])
    return groups


def draw_graphs(T: CubeTree, mu: AtomicMeasure, X: Cone, delta: float) -> Extraction:
    """Cover the leaves of T by graphs over V of Lipschitz constant at most alpha.

    Null cubes are dropped, bad cubes found, and the first level i0 >= 1 whose
    tail of weighted defects falls below delta * mu(leaves) is located.  Each
    non-bad cube of level i0 spawns the maximal subtree free of bad cubes;
    the atoms in its leaves form one patch.  Atoms sharing a deepest cube are
    never separated by the finite tree, so a patch that fails the pairwise
    cone check is split greedily (counted in ``split``).
    """
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    T = T.without_null(mu)
    if T is None or not T.level(T.depth):
        return Extraction([], 0, True, 0.0, 0.0)
    D = T.depth
    ms_deep = _level_defect_masses(T, mu, X, D)[1]
    leaf_mass = math.fsum(ms_deep)
    level_sums = [math.fsum(_level_defect_masses(T, mu, X, i)[0]) for i in range(D + 1)]
    bad = [set(_bad_indices(T, X, i).tolist()) for i in range(D + 1)]

    if D == 0:
        i0, achieved = 0, True
    else:
        i0, achieved = D, False
        for i in range(1, D + 1):
            if math.fsum(level_sums[i:]) < delta * leaf_mass:
                i0, achieved = i, True
                break

    rule = rule_for(X)
    g_deep = T.generation(D)
    deep = mu.level(g_deep)
    patches = []
    n_split = 0
    for t, Q in enumerate(T.level(i0)):
        if t in bad[i0]:
            continue
        # maximal subtree under Q avoiding bad cubes
        frontier = {Q.j}
        sub_levels = [[Q.j]]
        for i in range(i0 + 1, D + 1):
            coords = T._levels[i]
            nxt = {j for s, j in enumerate(coords)
                   if s not in bad[i] and tuple(v >> 1 for v in j) in frontier}
            sub_levels.append(sorted(nxt))
            frontier = nxt
        if not frontier:
            continue
        # drop atoms in cubes of the subtree lying in an annulus of another subtree cube
        excluded = set()
        for lev_coords in sub_levels[1:]:
            arr = np.array(lev_coords, dtype=np.int64).reshape(-1, Q.n)
            for a, b2 in annulus_pairs(arr, rule).tolist():
                excluded.add((len(lev_coords), tuple(arr[a])))
                excluded.add((len(lev_coords), tuple(arr[b2])))
        atom_idx = mu.atoms_in(Q)
        cells = deep.cells[deep.atom_cell[atom_idx]].tolist()
        keep = []
        for a, c in zip(atom_idx.tolist(), cells):
            if tuple(c) not in frontier:
                continue
            if excluded and any(
                (len(sub_levels[i - i0]), tuple(v >> (D - i) for v in c)) in excluded
                for i in range(i0 + 1, D + 1)
            ):
                continue
            keep.append(a)
        if not keep:
            continue
        keep = np.array(keep, dtype=np.int64)
        pts = mu.points[keep]
        if verify_cone_condition(pts, X.subspace, X.alpha).ok:
            groups = [list(range(len(keep)))]
        else:
            groups = _split_compatible(pts, X.subspace, X.alpha)
            n_split += 1
        for grp in groups:
            sel = keep[grp]
            patch = LipGraphPatch(X.subspace, X.alpha, mu.points[sel])
            patches.append(ExtractedPatch(patch, math.fsum(mu.weights[sel]), sel, Q))
    covered = math.fsum(p.covered_mass for p in patches)
    return Extraction(patches, i0, achieved, leaf_mass, covered, n_split)
