"""Fixture measures: sampled Lipschitz graphs, four-corner Cantor sets and their mixtures."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError
from .geometry import Subspace
from .lipgraph import sample_graph
from .measure import DEFAULT_DEPTH, AtomicMeasure

# graph and Cantor parts of a mixture sit this far apart, beyond every annulus
MIXTURE_SEPARATION = 1024.0


class SineSum:
    """f(v) = sum_t a_t sin(w_t . v + p_t) per output coordinate, shifted to vanish at v0.

    ``lip`` is a certified Euclidean Lipschitz bound: each component has
    gradient norm at most sum_t |a_t| |w_t|.
    """

    def __init__(self, amp, freq, phase, v0):
        self.amp = np.asarray(amp, dtype=float)      # (k, T)
        self.freq = np.asarray(freq, dtype=float)    # (k, T, m)
        self.phase = np.asarray(phase, dtype=float)  # (k, T)
        self.v0 = np.asarray(v0, dtype=float)
        per = np.sum(np.abs(self.amp) * np.linalg.norm(self.freq, axis=-1), axis=1)
        self.lip = float(math.sqrt(math.fsum(per**2)))
        self._base = self._raw(self.v0[None])[0]

    def _raw(self, v):
        v = np.asarray(v, dtype=float).reshape(-1, self.freq.shape[-1])
        arg = np.einsum("ktm,nm->nkt", self.freq, v) + self.phase
        return np.sum(self.amp * np.sin(arg), axis=-1)

    def __call__(self, v):
        return self._raw(v) - self._base


def random_lipschitz_function(m: int, k: int, lip: float, seed: int = 0, terms: int = 4, v0=None) -> SineSum:
    """Random smooth map R^m -> R^k with certified Lipschitz constant 0.999 lip (zero when lip = 0)."""
    rng = np.random.default_rng(seed)
    amp = rng.uniform(0.2, 1.0, (k, terms))
    freq = rng.normal(0.0, 6.0, (k, terms, m))
    phase = rng.uniform(0.0, 2 * math.pi, (k, terms))
    v0 = np.zeros(m) if v0 is None else v0
    raw = SineSum(amp, freq, phase, v0)
    scale = 0.999 * lip / raw.lip if raw.lip > 0 else 0.0
    return SineSum(amp * scale, freq, phase, v0)


def gen_graph(V: Subspace, lip: float, N: int, seed: int = 0, total_mass: float = 1.0,
              offset=None, K: int = DEFAULT_DEPTH) -> AtomicMeasure:
    """N equal atoms on a random graph over V through (1/2, ..., 1/2), inside [0.05, 0.95]^n."""
    if lip < 0:
        raise InputError("Lipschitz constant must be nonnegative")
    n, m = V.n, V.m
    c = np.full(n, 0.5)
    v0 = V.coords(c)
    W = V.complement()
    # graph over v0 + [-h, h]^m stays within 0.45 of c
    h = 0.45 / (math.sqrt(m) * math.sqrt(1 + lip * lip))
    f = random_lipschitz_function(m, n - m, lip, seed=seed, v0=v0)
    y0 = W.coords(c)
    shift = c - (v0 @ V.basis + y0 @ W.basis)
    off = shift if offset is None else shift + np.asarray(offset, dtype=float)

    def f_spec(v):
        return f(v) + y0

    weights = np.full(N, total_mass / N) if N else None
    return sample_graph(V, max(lip, 1e-300), f_spec, N, (v0 - h, v0 + h), seed=seed,
                        weights=weights, offset=off, label="graph", K=K)


def gen_four_corner(depth: int, offset=None, total_mass: float = 1.0, K: int = DEFAULT_DEPTH) -> AtomicMeasure:
    """4^depth equal atoms at the centers of the depth-level cells of the four-corner set in [0,1]^2."""
    if depth < 1:
        raise InputError("depth must be at least 1")
    corners = np.array([[0.0, 0.0]])
    for i in range(depth):
        step = 0.75 * 0.25**i
        corners = (corners[:, None, :] + step * np.array([[0, 0], [1, 0], [0, 1], [1, 1]])[None]).reshape(-1, 2)
    pts = corners + 0.5 * 0.25**depth
    if offset is not None:
        pts = pts + np.asarray(offset, dtype=float)
    N = len(pts)
    return AtomicMeasure(pts, np.full(N, total_mass / N), ["cantor"] * N, K=K, n=2)


def gen_mixture(V: Subspace, lip: float, N: int, cantor_depth: int, seed: int = 0,
                K: int = DEFAULT_DEPTH) -> AtomicMeasure:
    """Half the mass on a graph over V in [0,1]^2, half on a four-corner set shifted along the first axis."""
    if V.n != 2:
        raise InputError("mixtures live in the plane")
    g = gen_graph(V, lip, N, seed=seed, total_mass=0.5, K=K)
    c = gen_four_corner(cantor_depth, offset=(MIXTURE_SEPARATION, 0.0), total_mass=0.5, K=K)
    return concat(g, c)


def concat(*measures: AtomicMeasure) -> AtomicMeasure:
    n = measures[0].n
    K = max(mu.K for mu in measures)
    pts = np.concatenate([mu.points for mu in measures], axis=0)
    w = np.concatenate([mu.weights for mu in measures])
    labels = [lab for mu in measures for lab in mu.labels]
    return AtomicMeasure(pts, w, labels, K=K, n=n)
