"""Conical annuli A_{Q,X} and their dyadic discretizations.

In lattice units (side Q = 1) the set of offsets d with Q + d in Delta*_{Q,X}
does not depend on Q: the radius r_{Q,X} scales with side Q and cones are
dilation invariant.  :class:`AnnulusRule` decides membership of integer
offsets once per cone and is shared by every generation.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.spatial import cKDTree

from .dyadic import DyadicCube
from .geometry import Cone, Incidence, _box_upper_bound, _norm, boxes_meet_cone

RADIUS_FACTOR = 81.0
BNB_TOL = 1e-9
BNB_MAX_DEPTH = 40
TABLE_MAX_ENTRIES = 1 << 22


def radius_r(Q: DyadicCube, X: Cone) -> float:
    """r_{Q,X} = 81 sqrt(n) max(alpha, 1/alpha) side Q."""
    return RADIUS_FACTOR * math.sqrt(Q.n) * X.spread * Q.side


def radius_s(Q: DyadicCube, X: Cone) -> float:
    """s_{Q,X} = r_{Q,X} - sqrt(n) side Q."""
    return radius_r(Q, X) - math.sqrt(Q.n) * Q.side


def hausdorff_constant(n: int, X: Cone) -> float:
    """C_1 with hausdorff(Q, R) <= C_1 side Q for R in Delta*_{Q,X}."""
    return RADIUS_FACTOR * math.sqrt(n) * X.spread + 2 * math.sqrt(n)


def cardinality_bound(n: int, X: Cone) -> int:
    """C_2: number of unit lattice cubes whose closure meets B(0, r + 2 sqrt(n))."""
    rho = RADIUS_FACTOR * math.sqrt(n) * X.spread + 2 * math.sqrt(n)
    reach = int(math.ceil(rho)) + 1
    axis = np.arange(-reach, reach)
    # distance from the origin to [j, j+1] along one axis
    near = np.maximum(np.maximum(axis, -(axis + 1)), 0).astype(float) ** 2
    total = near
    for _ in range(n - 1):
        total = (total[..., None] + near).reshape(-1)
    return int(np.count_nonzero(total <= rho * rho))


def _canonical(d):
    """Flip each offset so its first nonzero coordinate is positive."""
    nz = d != 0
    first = np.argmax(nz, axis=1)
    lead = d[np.arange(len(d)), first]
    return d * np.where(lead < 0, -1, 1)[:, None]


class AnnulusRule:
    """Membership of lattice offsets in the discretized conical annulus of a cone.

    An offset d (integer n-vector) belongs when the closed cube R = Q + d
    (a) meets the closed ball B(x_Q, r), (b) is not inside the open ball
    U(x_Q, r/3), and (c) meets X_Q.  (a) and (b) are exact box-ball tests;
    (c) is the branch-and-bound box-versus-cone certificate, where
    ambiguous boxes count as meeting.  The cone is symmetric under z -> -z,
    so (c) is evaluated on a sign-canonical representative of d and the
    rule is exactly symmetric.
    """

    def __init__(self, cone: Cone, tol: float = BNB_TOL, max_depth: int = BNB_MAX_DEPTH):
        self.cone = cone
        self.n = cone.n
        self.tol = tol
        self.max_depth = max_depth
        self.r = RADIUS_FACTOR * math.sqrt(self.n) * cone.spread
        # no cube farther than this (center to center) can satisfy (a)
        self.reach = self.r + math.sqrt(self.n) / 2
        self.box_radius = int(math.floor(self.r + 0.5))
        self._memo: dict[tuple, int] = {}
        self._table = None
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def table_entries(self) -> int:
        return (2 * self.box_radius + 1) ** self.n

    def codes(self, offsets) -> np.ndarray:
        """Incidence code per offset: 0 outside, 1 inside, 2 inside conservatively."""
        d = np.asarray(offsets, dtype=np.int64).reshape(-1, self.n)
        if self._table is None:
            self._queries += len(d)
            if self._queries > self.table_entries // 4 and self.table_entries <= TABLE_MAX_ENTRIES:
                self._build_table()
        if self._table is not None:
            out = np.zeros(len(d), dtype=np.int8)
            inside = np.all(np.abs(d) <= self.box_radius, axis=1)
            idx = tuple((d[inside] + self.box_radius).T)
            out[inside] = self._table[idx]
            return out
        return self._evaluate(d)

    def contains(self, offsets) -> np.ndarray:
        return self.codes(offsets) != 0

    def _shell(self, d):
        a = np.abs(d).astype(float)
        near = np.maximum(a - 0.5, 0.0)
        far = a + 0.5
        return (_norm(near) <= self.r) & (_norm(far) >= self.r / 3)

    def _evaluate(self, d) -> np.ndarray:
        out = np.zeros(len(d), dtype=np.int8)
        if len(d) == 0:
            return out
        shell = np.flatnonzero(self._shell(d))
        if len(shell) == 0:
            return out
        canon = _canonical(d[shell])
        centers = canon.astype(float)
        half = np.ones_like(centers)
        g = self.cone.excess(centers)
        ub = _box_upper_bound(self.cone, centers, half)
        res = np.where(g > 0, Incidence.MEETS, Incidence.DISJOINT).astype(np.int8)
        todo = np.flatnonzero((g <= 0) & (ub > -self.tol))
        if len(todo):
            keys = [tuple(row) for row in canon[todo].tolist()]
            missing = [i for i, key in zip(todo, keys) if key not in self._memo]
            if missing:
                missing = np.array(missing)
                found = boxes_meet_cone(self.cone, centers[missing], half[missing], self.tol, self.max_depth)
                with self._lock:
                    for i, code in zip(missing, found.tolist()):
                        self._memo[tuple(canon[i].tolist())] = code
            res[todo] = [self._memo[key] for key in keys]
        out[shell] = res
        return out

    def _build_table(self):
        with self._lock:
            if self._table is not None:
                return
            b = self.box_radius
            axis = np.arange(-b, b + 1)
            grid = np.stack(np.meshgrid(*([axis] * self.n), indexing="ij"), axis=-1).reshape(-1, self.n)
        table = self._evaluate(grid).reshape((2 * b + 1,) * self.n)
        with self._lock:
            self._table = table

    def offsets(self, conservative: bool = False) -> np.ndarray:
        """All member offsets in lexicographic order (only the conservative ones if asked)."""
        key = "_offsets_cons" if conservative else "_offsets_all"
        cached = self.__dict__.get(key)
        if cached is None:
            cached = self._enumerate(conservative)
            cached.setflags(write=False)
            self.__dict__[key] = cached
        return cached

    def _enumerate(self, conservative: bool) -> np.ndarray:
        b = self.box_radius
        axis = np.arange(-b, b + 1)
        rows = []
        # slice along the first axis to bound memory in higher dimensions
        rest = np.stack(np.meshgrid(*([axis] * (self.n - 1)), indexing="ij"), axis=-1).reshape(-1, self.n - 1)
        for first in axis:
            d = np.concatenate([np.full((len(rest), 1), first), rest], axis=1)
            codes = self.codes(d)
            keep = codes == Incidence.AMBIGUOUS if conservative else codes != 0
            rows.append(d[keep])
        return np.concatenate(rows, axis=0)


_rules: dict[tuple, AnnulusRule] = {}
_rules_lock = threading.Lock()


def rule_for(cone: Cone, tol: float = BNB_TOL, max_depth: int = BNB_MAX_DEPTH) -> AnnulusRule:
    """Shared rule per cone, created at most once."""
    key = (cone, tol, max_depth)
    rule = _rules.get(key)
    if rule is None:
        with _rules_lock:
            rule = _rules.get(key)
            if rule is None:
                rule = AnnulusRule(cone, tol, max_depth)
                _rules[key] = rule
    return rule


def delta_star(Q: DyadicCube, X: Cone) -> frozenset:
    """Same-generation cubes R meeting the conical annulus A_{Q,X}."""
    base = np.array(Q.j, dtype=np.int64)
    return frozenset(DyadicCube._trusted(Q.k, tuple(row)) for row in (rule_for(X).offsets() + base).tolist())


def nabla_star(R: DyadicCube, X: Cone) -> frozenset:
    """Cubes Q with R in Delta*_{Q,X}."""
    rule = rule_for(X)
    b = rule.box_radius
    base = np.array(R.j, dtype=np.int64)
    axis = np.arange(-b, b + 1)
    rest = np.stack(np.meshgrid(*([axis] * (R.n - 1)), indexing="ij"), axis=-1).reshape(-1, R.n - 1)
    found = []
    for first in axis:
        cand = base + np.concatenate([np.full((len(rest), 1), first), rest], axis=1)
        keep = rule.contains(base - cand)
        found.extend(cand[keep].tolist())
    return frozenset(DyadicCube._trusted(R.k, tuple(row)) for row in found)


def annulus_pairs(cells, rule: AnnulusRule) -> np.ndarray:
    """Pairs (i, j), i < j, of lattice cells with cells[j] - cells[i] in the rule.

    The rule is symmetric, so each returned pair means both cells lie in each
    other's discretized annulus.  Pairs come back in lexicographic order.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) < 2:
        return np.empty((0, 2), dtype=np.int64)
    pairs = cKDTree(cells.astype(float)).query_pairs(rule.reach + 1e-9, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    keep = rule.contains(cells[pairs[:, 1]] - cells[pairs[:, 0]])
    return pairs[keep].astype(np.int64)


def conservative_members(Q: DyadicCube, X: Cone) -> frozenset:
    """Cubes of Delta*_{Q,X} admitted only because the cone test was ambiguous."""
    base = np.array(Q.j, dtype=np.int64)
    rows = rule_for(X).offsets(conservative=True) + base
    return frozenset(DyadicCube(Q.k, tuple(row)) for row in rows.tolist())
