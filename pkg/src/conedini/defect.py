"""Conical defect, truncated conical Dini functions and mu-normalized sums."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .annulus import annulus_pairs, rule_for
from .dyadic import DyadicCube, cube_at
from .geometry import Cone
from .measure import AtomicMeasure

_cache_lock = threading.Lock()


def _grouped_fsum(index, values, size):
    """fsum of values grouped by index, one result per slot in range(size)."""
    out = np.zeros(size)
    if len(index) == 0:
        return out
    order = np.argsort(index, kind="stable")
    index, values = index[order], values[order]
    starts = np.flatnonzero(np.r_[True, index[1:] != index[:-1]])
    for s, e in zip(starts, np.r_[starts[1:], len(index)]):
        out[index[s]] = math.fsum(values[s:e])
    return out


def level_defects(mu: AtomicMeasure, X: Cone, k: int) -> np.ndarray:
    """Defect(mu, Q, X) for every nonempty generation-k cube, aligned with mu.level(k).cells.

    Memoized on the measure per (cone, generation).
    """
    cache = mu.__dict__.setdefault("_defect_cache", {})
    key = (X, k)
    hit = cache.get(key)
    if hit is not None:
        return hit
    lev = mu.level(k)
    pairs = annulus_pairs(lev.cells, rule_for(X))
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    seen = _grouped_fsum(src, lev.masses[dst], len(lev.cells))
    out = seen / lev.masses if len(lev.cells) else seen
    out.setflags(write=False)
    with _cache_lock:
        cache.setdefault(key, out)
    return cache[key]


def defect(mu: AtomicMeasure, Q: DyadicCube, X: Cone) -> float:
    """Defect(mu,Q,X) = sum over R in Delta*_{Q,X} of mu(R)/mu(Q); zero when mu(Q) = 0."""
    mq = mu.mass(Q)
    if mq == 0:
        return 0.0
    lev = mu.level(Q.k)
    rule = rule_for(X)
    offsets = lev.cells - np.array(Q.j, dtype=np.int64)
    near = np.flatnonzero(np.linalg.norm(offsets, axis=1) <= rule.reach + 1e-9)
    near = near[rule.contains(offsets[near])]
    return math.fsum(lev.masses[near]) / mq


def dini_truncated(mu: AtomicMeasure, x, X: Cone, K: int) -> float:
    """G^K(x) = sum over generations k = 0..K of Defect(mu, cube_at(x, k), X)."""
    if K < 0:
        raise ValueError("depth K must be nonnegative")
    return math.fsum(defect(mu, cube_at(x, k), X) for k in range(K + 1))


@dataclass
class DiniProfile:
    """Truncated Dini values of every atom for one cone, with the cube defects behind them."""

    cone: Cone
    K: int
    values: np.ndarray
    level_values: list = field(repr=False)
    measure: AtomicMeasure = field(repr=False)

    def cube_defect(self, Q: DyadicCube) -> float:
        lev = self.measure.level(Q.k)
        idx = lev.lookup.get(Q.j)
        if idx is None or not 0 <= Q.k <= self.K:
            return defect(self.measure, Q, self.cone)
        return float(self.level_values[Q.k][idx])

    @property
    def cube_defects(self) -> dict:
        out = {}
        for k in range(self.K + 1):
            lev = self.measure.level(k)
            for j, v in zip(lev.cells.tolist(), self.level_values[k].tolist()):
                out[DyadicCube(k, tuple(j))] = v
        return out

    def weighted_sum(self) -> float:
        """sum over atoms of weight * G^K."""
        return math.fsum(self.measure.weights * self.values)


def dini_profile(mu: AtomicMeasure, X: Cone, K: int) -> DiniProfile:
    per_level = [level_defects(mu, X, k) for k in range(K + 1)]
    if len(mu) == 0:
        return DiniProfile(X, K, np.zeros(0), per_level, mu)
    stacked = np.stack([per_level[k][mu.level(k).atom_cell] for k in range(K + 1)], axis=1)
    values = np.array([math.fsum(row) for row in stacked.tolist()])
    return DiniProfile(X, K, values, per_level, mu)


def normalized_sum(T, b, mu: AtomicMeasure, x) -> float:
    """S_{T,b}(mu, x) = sum over Q in T containing x of b(Q)/mu(Q), with 0/0 = 0 and c/0 = inf.

    ``b`` maps cubes to nonnegative reals; missing cubes count as zero.
    """
    total = []
    for i in range(T.depth + 1):
        Q = cube_at(x, T.top.k + i)
        if Q not in T:
            continue
        bq = float(b.get(Q, 0.0))
        if bq == 0.0:
            continue
        mq = mu.mass(Q)
        if mq == 0.0:
            return math.inf
        total.append(bq / mq)
    return math.fsum(total)
