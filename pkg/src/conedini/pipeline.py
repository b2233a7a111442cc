"""Grid-wide Dini analysis, graph-carried versus singular decomposition, and graph extraction."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conefamily import ConeGrid
from .defect import DiniProfile, dini_profile
from .dyadic import DyadicCube
from .errors import ContractViolation, InputError
from .geometry import Cone
from .measure import AtomicMeasure
from .tree import CubeTree, draw_graphs

THETA_FLOOR = 1e-9
DIAGNOSTIC_FACTOR = 83.0


def thread_count() -> int:
    """Worker cap from CONEDINI_THREADS (default 1)."""
    raw = os.environ.get("CONEDINI_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise InputError(f"CONEDINI_THREADS must be an integer, got {raw!r}") from exc


def grid_profiles(mu: AtomicMeasure, grid: ConeGrid, K: int, threads: int | None = None) -> list[DiniProfile]:
    """One Dini profile per grid cone, in cone-id order whatever the thread count."""
    cones = grid.cones
    if not cones:
        raise InputError("empty cone grid")
    if K < 0:
        raise InputError("depth K must be nonnegative")
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(cones) == 1:
        return [dini_profile(mu, X, K) for X in cones]
    with ThreadPoolExecutor(max_workers=min(threads, len(cones))) as pool:
        return list(pool.map(lambda X: dini_profile(mu, X, K), cones))


def best_cones(profiles: list[DiniProfile]):
    """(min over cones of G^K, id of the first cone attaining it) per atom."""
    values = np.stack([p.values for p in profiles], axis=0)
    best = np.argmin(values, axis=0)
    return values[best, np.arange(values.shape[1])], best


def adaptive_theta(G: np.ndarray, seed: int = 0) -> float:
    """Half the least nonzero value on a random half of the atoms, floored at 1e-9."""
    if len(G) == 0:
        return THETA_FLOOR
    rng = np.random.default_rng(seed)
    calib = rng.permutation(len(G))[: max(1, len(G) // 2)]
    nz = G[calib][G[calib] > 0]
    if len(nz) == 0:
        return THETA_FLOOR
    return max(THETA_FLOOR, 0.5 * float(np.min(nz)))


@dataclass
class DecompositionReport:
    best_cone: np.ndarray
    G: np.ndarray
    carried: np.ndarray
    theta: float
    K: int
    grid: dict
    mass_carried: float
    mass_singular: float
    confusion: dict | None = None
    measure: AtomicMeasure | None = field(default=None, repr=False)

    @property
    def classes(self) -> list[str]:
        return ["graph-carried" if c else "singular-suspect" for c in self.carried]

    def graph_part(self) -> AtomicMeasure:
        return self.measure.restrict(self.carried)

    def singular_part(self) -> AtomicMeasure:
        return self.measure.restrict(~self.carried)

    def to_dict(self):
        out = {
            "params": {"K": self.K, "theta": self.theta, "grid": self.grid},
            "per_atom": [
                {"idx": i, "best_cone": int(c), "G": float(g), "class": cl}
                for i, (c, g, cl) in enumerate(zip(self.best_cone.tolist(), self.G.tolist(), self.classes))
            ],
            "masses": {"carried": self.mass_carried, "singular": self.mass_singular},
        }
        if self.confusion is not None:
            out["confusion"] = self.confusion
        return out


def _confusion(labels, carried) -> dict | None:
    if all(lab is None for lab in labels):
        return None
    table: dict[str, dict[str, int]] = {}
    for lab, c in zip(labels, carried.tolist()):
        row = table.setdefault(lab if lab is not None else "unlabeled", {"graph-carried": 0, "singular-suspect": 0})
        row["graph-carried" if c else "singular-suspect"] += 1
    return {k: table[k] for k in sorted(table)}


def decompose(mu: AtomicMeasure, grid: ConeGrid, K: int = 8, theta: float | None = None, seed: int = 0,
              threads: int | None = None) -> DecompositionReport:
    """Classify atoms as graph-carried when min over the grid of G^K is at most theta.

    ``theta=None`` picks :func:`adaptive_theta` on a split drawn from ``seed``.
    """
    if len(grid) == 0:
        raise InputError("empty cone grid")
    if len(mu):
        G, best = best_cones(grid_profiles(mu, grid, K, threads))
    else:
        G, best = np.zeros(0), np.zeros(0, dtype=np.int64)
    if theta is None:
        theta = adaptive_theta(G, seed)
    carried = G <= theta
    return DecompositionReport(
        best_cone=best,
        G=G,
        carried=carried,
        theta=float(theta),
        K=K,
        grid=grid.descriptor,
        mass_carried=math.fsum(mu.weights[carried]),
        mass_singular=math.fsum(mu.weights[~carried]),
        confusion=_confusion(mu.labels, carried),
        measure=mu,
    )


def integral_diagnostic(mu: AtomicMeasure, X: Cone, x0, r0: float, K: int = 8, graph_label: str = "graph",
                        lip: float | None = None):
    """Weighted G^K over graph atoms in B(x0, r0) against off-graph mass in the enlarged ball.

    The enlargement is 83 sqrt(n) max(alpha, 1/alpha).  Returns
    (lhs, rhs, ratio); ratio is lhs/rhs, or 0 when both vanish.  A positive
    lhs with rhs = 0 raises :class:`ContractViolation`.  When ``lip`` (the
    graph's Lipschitz constant) is given, alpha >= 2 lip is required.
    """
    if lip is not None and X.alpha < 2 * lip:
        raise InputError(f"cone opening {X.alpha} is below twice the graph constant {lip}")
    on = mu.label_mask(graph_label)
    x0 = np.asarray(x0, dtype=float)
    if len(mu) == 0:
        return 0.0, 0.0, 0.0
    dist = np.linalg.norm(mu.points - x0, axis=1)
    near = on & (dist <= r0)
    G = dini_profile(mu, X, K).values
    lhs = math.fsum(mu.weights[near] * G[near])
    C = DIAGNOSTIC_FACTOR * math.sqrt(mu.n) * X.spread
    rhs = math.fsum(mu.weights[~on & (dist <= r0 + C)])
    if rhs == 0:
        if lhs != 0:
            raise ContractViolation("graph atoms carry defect with no off-graph mass nearby")
        return lhs, rhs, 0.0
    return lhs, rhs, lhs / rhs


@dataclass
class GraphExtraction:
    patches: list
    leaf_mass: float
    covered_mass: float
    tails: list

    def to_list(self):
        return [
            {
                "basis": p.patch.subspace.basis.tolist(),
                "alpha": p.patch.alpha,
                "anchor_points": p.patch.anchors.tolist(),
                "covered_mass": p.covered_mass,
            }
            for p in self.patches
        ]


def extract_graphs(mu: AtomicMeasure, X: Cone, delta: float, depth: int) -> GraphExtraction:
    """Run graph drawing on the support tree under every generation-0 cube, in lexicographic order."""
    if depth < 0:
        raise InputError("depth must be nonnegative")
    patches, tails = [], []
    leaf, covered = [], []
    for j in mu.level(0).cells.tolist():
        T = CubeTree.support(mu, DyadicCube(0, tuple(j)), depth)
        ex = draw_graphs(T, mu, X, delta)
        patches.extend(ex.patches)
        tails.append(ex.tail_achieved)
        leaf.append(ex.leaf_mass)
        covered.append(ex.covered_mass)
    return GraphExtraction(patches, math.fsum(leaf), math.fsum(covered), tails)
