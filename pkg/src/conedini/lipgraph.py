"""Point sets avoiding their own cones, McShane extensions and sampled graphs."""

from __future__ import annotations

import json
import math
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractViolation, InputError
from .geometry import Subspace, _norm
from .measure import DEFAULT_DEPTH, AtomicMeasure

PAIR_BLOCK = 1 << 20


class ConeCheck(NamedTuple):
    """Outcome of a pairwise cone check; truthy iff the check passed."""

    ok: bool
    pair: tuple | None = None

    def __bool__(self):
        return bool(self.ok)


def verify_cone_condition(E, V: Subspace, alpha: float) -> ConeCheck:
    """Check dist(y - x, V) <= alpha dist(y - x, V^perp) for all pairs of E.

    Equality passes since the cone is open.  Returns the first violating
    pair (i, j), i < j, in row-major order on failure.
    """
    E = np.asarray(E, dtype=float)
    if E.size == 0:
        return ConeCheck(True)
    E = E.reshape(-1, V.n)
    N = len(E)
    rows = max(1, PAIR_BLOCK // max(N, 1))
    for start in range(0, N - 1, rows):
        stop = min(N - 1, start + rows)
        i = np.repeat(np.arange(start, stop), N)
        j = np.tile(np.arange(N), stop - start)
        keep = j > i
        i, j = i[keep], j[keep]
        diff = E[j] - E[i]
        bad = V.dist(diff) > alpha * V.dist_perp(diff)
        if bad.any():
            t = int(np.argmax(bad))
            return ConeCheck(False, (int(i[t]), int(j[t])))
    return ConeCheck(True)


class LipGraphPatch:
    """A finite anchor set that avoids its own cones X(V, alpha).

    ``audited_constant`` is the Euclidean Lipschitz constant guaranteed for
    the vector-valued extension, alpha * sqrt(n - m).
    """

    def __init__(self, subspace: Subspace, alpha: float, anchors, check: bool = False):
        alpha = float(alpha)
        if not (alpha > 0 and math.isfinite(alpha)):
            raise InputError("alpha must be positive and finite")
        anchors = np.array(anchors, dtype=float).reshape(-1, subspace.n)
        anchors.setflags(write=False)
        self.subspace = subspace
        self.alpha = alpha
        self.anchors = anchors
        if check:
            res = verify_cone_condition(anchors, subspace, alpha)
            if not res.ok:
                raise ContractViolation(f"anchors {res.pair} violate the cone condition")

    @property
    def audited_constant(self) -> float:
        return self.alpha * math.sqrt(self.subspace.n - self.subspace.m)

    def check(self) -> ConeCheck:
        return verify_cone_condition(self.anchors, self.subspace, self.alpha)

    def to_dict(self):
        return {
            "basis": self.subspace.basis.tolist(),
            "alpha": self.alpha,
            "anchors": self.anchors.tolist(),
            "audited_constant": self.audited_constant,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(Subspace(d["basis"]), d["alpha"], d["anchors"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed patch record: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __len__(self):
        return len(self.anchors)

    def __repr__(self):
        return f"LipGraphPatch(n={self.subspace.n}, m={self.subspace.m}, alpha={self.alpha}, anchors={len(self)})"


class GraphFunction:
    """f : V -> V^perp extending a patch, in coordinates of V and a frame of V^perp.

    Each component is the mean of the upper and lower McShane envelopes
    min_i (y_ij + alpha |v - v_i|) and max_i (y_ij - alpha |v - v_i|).  Both
    are alpha-Lipschitz and match the anchors when the anchors form a graph;
    the mean is constant for a single anchor.
    """

    def __init__(self, patch: LipGraphPatch):
        self.patch = patch
        self.V = patch.subspace
        self.W = patch.subspace.complement()
        self.alpha = patch.alpha
        self.v = self.V.coords(patch.anchors)
        self.y = self.W.coords(patch.anchors)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        v = v.reshape(-1, self.V.m)
        if len(self.v) == 0:
            out = np.zeros((len(v), self.W.m))
        else:
            dist = self.alpha * _norm(v[:, None, :] - self.v[None, :, :])[:, :, None]
            upper = np.min(self.y[None, :, :] + dist, axis=1)
            lower = np.max(self.y[None, :, :] - dist, axis=1)
            out = 0.5 * (upper + lower)
        return out[0] if single else out

    def graph_point(self, v):
        """Point of R^n over v: (v, f(v)) expressed in ambient coordinates."""
        v = np.asarray(v, dtype=float)
        fv = self(v)
        return v @ self.V.basis + fv @ self.W.basis


def extend(patch: LipGraphPatch) -> GraphFunction:
    """McShane extension of the anchor data; refuses anchors violating the cone condition."""
    res = patch.check()
    if not res.ok:
        raise ContractViolation(f"anchors {res.pair} violate the cone condition; no graph passes through them")
    return GraphFunction(patch)


def audit_lipschitz(f: Callable, m: int, lip: float, box, samples: int = 4096, seed: int = 0,
                    rel: float = 1e-9) -> float:
    """Largest observed difference quotient of f over random pairs in box; raises if above lip."""
    lo, hi = (np.asarray(b, dtype=float).reshape(m) for b in box)
    rng = np.random.default_rng(seed)
    a = lo + (hi - lo) * rng.random((samples, m))
    # half the pairs are close, to probe local slopes
    b = np.where(
        (np.arange(samples) % 2 == 0)[:, None],
        lo + (hi - lo) * rng.random((samples, m)),
        np.clip(a + 1e-4 * (hi - lo) * rng.standard_normal((samples, m)), lo, hi),
    )
    fa, fb = np.asarray(f(a), dtype=float), np.asarray(f(b), dtype=float)
    fa, fb = fa.reshape(samples, -1), fb.reshape(samples, -1)
    den = _norm(a - b)
    num = _norm(fa - fb)
    ok = den > 0
    worst = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0
    if worst > lip * (1 + rel):
        raise InputError(f"function fails its Lipschitz certificate: slope {worst} > {lip}")
    return worst


def sample_graph(V: Subspace, alpha_f: float, f_spec: Callable, N: int, box, seed: int = 0,
                 weights=None, offset=None, label: str = "graph", K: int = DEFAULT_DEPTH) -> AtomicMeasure:
    """N atoms x = v + f(v) with v uniform in ``box`` (coordinates of V).

    ``f_spec`` maps (N, m) coordinates of V to (N, n - m) coordinates in the
    frame of ``V.complement()``.  The certificate alpha_f is audited by
    finite differences before sampling.  ``offset`` translates all atoms.
    """
    if N < 0:
        raise InputError("N must be nonnegative")
    m, n = V.m, V.n
    lo, hi = (np.asarray(b, dtype=float).reshape(m) for b in box)
    audit_lipschitz(f_spec, m, alpha_f, (lo, hi), seed=seed)
    if N == 0:
        return AtomicMeasure(np.empty((0, n)), n=n, K=K)
    rng = np.random.default_rng(seed)
    v = lo + (hi - lo) * rng.random((N, m))
    y = np.asarray(f_spec(v), dtype=float).reshape(N, n - m)
    W = V.complement()
    pts = v @ V.basis + y @ W.basis
    if offset is not None:
        pts = pts + np.asarray(offset, dtype=float)
    w = np.ones(N) if weights is None else weights
    return AtomicMeasure(pts, w, [label] * N, K=K, n=n)
