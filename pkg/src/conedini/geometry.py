"""Subspaces, bad cones, set distances and the box-versus-cone predicate.

Projections and norms are computed with explicit loops over coordinates
rather than BLAS calls.  That keeps every per-point result independent of
batch shape, so a predicate evaluated on ``z`` and on ``-z`` agrees bit for
bit and a single query agrees with the same query made inside a large batch.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dyadic import DyadicCube
from .errors import InputError

ORTHO_TOL = 1e-12


def _norm(z):
    """Euclidean norm over the last axis, summed in fixed coordinate order."""
    z = np.asarray(z, dtype=float)
    acc = z[..., 0] * z[..., 0]
    for i in range(1, z.shape[-1]):
        acc = acc + z[..., i] * z[..., i]
    return np.sqrt(acc)


class Subspace:
    """An m-dimensional linear subspace of R^n given by an orthonormal basis.

    ``basis`` has shape (m, n).  Use :meth:`from_vectors` to orthonormalize
    an arbitrary spanning set.
    """

    def __init__(self, basis):
        basis = np.array(basis, dtype=float, ndmin=2)
        if basis.ndim != 2:
            raise InputError("basis must be a 2-d array of shape (m, n)")
        m, n = basis.shape
        if not 1 <= m <= n - 1:
            raise InputError(f"subspace dimension m={m} must satisfy 1 <= m <= n-1 (n={n})")
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(m))) > ORTHO_TOL:
            raise InputError("basis vectors must be orthonormal to 1e-12")
        basis.setflags(write=False)
        self.basis = basis
        self.n = n
        self.m = m
        # |P e_i| and |P_perp e_i|, used to bound projections of boxes
        self._col_par = _norm(basis.T)
        self._col_perp = np.sqrt(np.clip(1.0 - self._col_par**2, 0.0, None)) + 1e-15

    @classmethod
    def from_vectors(cls, vectors):
        vectors = np.array(vectors, dtype=float, ndmin=2)
        q, r = np.linalg.qr(vectors.T)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise InputError("spanning vectors are linearly dependent")
        # fix signs so the first basis vector follows the first input vector
        q = q * np.sign(np.diag(r))
        return cls(q.T)

    def coords(self, x):
        """Coordinates of P_V x in the basis, shape (..., m)."""
        x = self._check(x)
        out = np.empty(x.shape[:-1] + (self.m,))
        for a in range(self.m):
            acc = x[..., 0] * self.basis[a, 0]
            for i in range(1, self.n):
                acc = acc + x[..., i] * self.basis[a, i]
            out[..., a] = acc
        return out

    def project(self, x):
        c = self.coords(x)
        out = c[..., 0, None] * self.basis[0]
        for a in range(1, self.m):
            out = out + c[..., a, None] * self.basis[a]
        return out

    def dist(self, x):
        """dist(x, V) = |x - P_V x|."""
        x = self._check(x)
        return _norm(x - self.project(x))

    def dist_perp(self, x):
        """dist(x, V^perp) = |P_V x|."""
        return _norm(self.coords(x))

    def complement(self) -> Subspace:
        u, _, _ = np.linalg.svd(np.eye(self.n) - self.basis.T @ self.basis)
        comp = u[:, : self.n - self.m].T
        # Gram-Schmidt once more against V for a clean orthonormal frame
        comp = comp - (comp @ self.basis.T) @ self.basis
        q, r = np.linalg.qr(comp.T)
        return Subspace((q * np.sign(np.diag(r))).T)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise InputError(f"expected points in R^{self.n}, got shape {x.shape}")
        return x

    def __eq__(self, other):
        return isinstance(other, Subspace) and np.array_equal(self.basis, other.basis)

    def __hash__(self):
        return hash((self.basis.shape, self.basis.tobytes()))

    def __repr__(self):
        return f"Subspace(n={self.n}, m={self.m}, basis={self.basis.tolist()})"


def dist_to_subspace(x, V: Subspace):
    d = V.dist(x)
    return float(d) if np.ndim(d) == 0 else d


def dist_to_complement(x, V: Subspace):
    d = V.dist_perp(x)
    return float(d) if np.ndim(d) == 0 else d


class Cone:
    """The open bad cone X(V, alpha) = {z : dist(z,V) > alpha * dist(z,V^perp)}."""

    def __init__(self, subspace: Subspace, alpha: float):
        alpha = float(alpha)
        if not (alpha > 0 and math.isfinite(alpha)):
            raise InputError(f"cone opening alpha must lie in (0, inf), got {alpha}")
        self.subspace = subspace
        self.alpha = alpha

    @property
    def n(self):
        return self.subspace.n

    @property
    def m(self):
        return self.subspace.m

    @property
    def spread(self):
        """max(alpha, 1/alpha)."""
        return max(self.alpha, 1.0 / self.alpha)

    def excess(self, z):
        """g(z) = dist(z,V) - alpha*dist(z,V^perp); z lies in the cone iff g(z) > 0."""
        return self.subspace.dist(z) - self.alpha * self.subspace.dist_perp(z)

    def contains(self, apex, y):
        return in_cone(self, apex, y)

    def with_alpha(self, alpha) -> Cone:
        return Cone(self.subspace, alpha)

    def to_dict(self):
        return {
            "n": self.n,
            "m": self.m,
            "basis": self.subspace.basis.tolist(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            basis = np.array(d["basis"], dtype=float, ndmin=2)
            n, m, alpha = int(d["n"]), int(d["m"]), d["alpha"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed cone record: {exc}") from exc
        if basis.shape != (m, n):
            raise InputError(f"basis shape {basis.shape} does not match (m, n) = ({m}, {n})")
        return cls(Subspace(basis), alpha)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, Cone) and self.alpha == other.alpha and self.subspace == other.subspace

    def __hash__(self):
        return hash((self.subspace, self.alpha))

    def __repr__(self):
        return f"Cone(alpha={self.alpha}, basis={self.subspace.basis.tolist()})"


def in_cone(X: Cone, apex, y):
    """True iff y lies in the translate apex + X (strict inequality)."""
    z = np.asarray(y, dtype=float) - np.asarray(apex, dtype=float)
    res = X.subspace.dist(z) > X.alpha * X.subspace.dist_perp(z)
    return bool(res) if np.ndim(res) == 0 else res


class Incidence(enum.IntEnum):
    DISJOINT = 0
    MEETS = 1
    # sup of the cone excess over the box lies in (-tol, 0]; counted as meeting
    AMBIGUOUS = 2

    @property
    def meets(self):
        return self is not Incidence.DISJOINT

    @property
    def conservative(self):
        return self is Incidence.AMBIGUOUS


def _weighted_sum(h, w):
    acc = h[..., 0] * w[0]
    for i in range(1, h.shape[-1]):
        acc = acc + h[..., i] * w[i]
    return acc


def _box_upper_bound(cone: Cone, centers, half):
    V = cone.subspace
    radius = _norm(half)
    r_par = np.minimum(radius, _weighted_sum(half, V._col_par))
    r_perp = np.minimum(radius, _weighted_sum(half, V._col_perp))
    d_v = V.dist(centers)
    d_vp = V.dist_perp(centers)
    return d_v + r_perp - cone.alpha * np.maximum(d_vp - r_par, 0.0)


def boxes_meet_cone(cone: Cone, centers, half, tol: float, max_depth: int = 40,
                    max_nodes: int = 4096):
    """Vectorized branch and bound: does each closed box meet the open cone?

    ``centers`` and ``half`` have shape (B, n).  Returns an int8 array of
    :class:`Incidence` codes.  The cone excess is (1+alpha)-Lipschitz, and
    the bound used is the sharper projection-radius bound.  Boxes whose
    refinement exceeds ``max_depth`` or ``max_nodes`` are reported
    AMBIGUOUS.
    """
    centers = np.array(centers, dtype=float, ndmin=2)
    half = np.broadcast_to(np.asarray(half, dtype=float), centers.shape).copy()
    nb, n = centers.shape
    meets = np.zeros(nb, dtype=bool)
    amb = np.zeros(nb, dtype=bool)
    owner = np.arange(nb)
    C, H = centers, half
    signs = np.array(list(itertools.product((-0.5, 0.5), repeat=n)))
    for depth in range(max_depth + 1):
        if C.shape[0] == 0:
            break
        g = cone.excess(C)
        hit = g > 0
        meets[owner[hit]] = True
        ub = _box_upper_bound(cone, C, H)
        live = ~meets[owner] & (ub > -tol)
        tiny = live & (ub - g < tol)
        amb[owner[tiny]] = True
        live &= ~tiny
        C, H, owner = C[live], H[live], owner[live]
        if C.shape[0] == 0:
            break
        if depth == max_depth:
            amb[owner] = True
            break
        counts = np.bincount(owner, minlength=nb)
        crowded = counts[owner] * len(signs) > max_nodes
        if crowded.any():
            amb[owner[crowded]] = True
            C, H, owner = C[~crowded], H[~crowded], owner[~crowded]
        C = (C[:, None, :] + signs[None, :, :] * H[:, None, :]).reshape(-1, n)
        H = np.repeat(H * 0.5, len(signs), axis=0)
        owner = np.repeat(owner, len(signs))
    out = np.zeros(nb, dtype=np.int8)
    out[amb] = Incidence.AMBIGUOUS
    out[meets] = Incidence.MEETS
    return out


def box_meets_cone(cone: Cone, lo, hi, tol: float = 1e-9, max_depth: int = 40) -> Incidence:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    code = boxes_meet_cone(cone, ((lo + hi) / 2)[None], ((hi - lo) / 2)[None], tol, max_depth)
    return Incidence(int(code[0]))


def cube_meets_cone_union(R: DyadicCube, Q: DyadicCube, X: Cone, tol: float | None = None,
                          max_depth: int = 40) -> Incidence:
    """Decide whether closure(R) meets X_Q, the union of cones X_q over q in closure(Q).

    R meets X_Q iff the Minkowski difference closure(R) - closure(Q), itself
    an axis-aligned box, meets the open cone X.
    """
    if R.n != Q.n or R.n != X.n:
        raise InputError("cubes and cone must share the ambient dimension")
    if tol is None:
        tol = 1e-9 * Q.side
    rlo, rhi = R.bounds()
    qlo, qhi = Q.bounds()
    return box_meets_cone(X, rlo - qhi, rhi - qlo, tol, max_depth)


@dataclass(frozen=True)
class Box:
    """A closed axis-aligned box [lo, hi]."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a > b for a, b in zip(self.lo, self.hi)):
            raise InputError("box needs lo <= hi coordinatewise")

    @classmethod
    def of(cls, cube: DyadicCube) -> Box:
        lo, hi = cube.bounds()
        return cls(tuple(lo.tolist()), tuple(hi.tolist()))

    @property
    def n(self):
        return len(self.lo)

    def vertices(self):
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def dist_from(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo, hi = np.array(self.lo), np.array(self.hi)
        return _norm(np.maximum(np.maximum(lo - pts, pts - hi), 0.0))


def _as_set(S):
    if isinstance(S, Box):
        return S
    arr = np.asarray(S, dtype=float)
    if arr.size == 0:
        return np.empty((0, arr.shape[-1] if arr.ndim == 2 else 0))
    return np.atleast_2d(arr)


def _is_empty(S):
    return not isinstance(S, Box) and S.shape[0] == 0


def gap(S, T) -> float:
    """inf{|s - t| : s in S, t in T} for finite point sets and closed boxes."""
    S, T = _as_set(S), _as_set(T)
    if _is_empty(S) or _is_empty(T):
        raise InputError("gap is only defined for nonempty sets")
    if isinstance(S, Box) and isinstance(T, Box):
        sep = np.maximum(np.maximum(np.array(T.lo) - np.array(S.hi), np.array(S.lo) - np.array(T.hi)), 0.0)
        return float(_norm(sep))
    if isinstance(S, Box):
        S, T = T, S
    if isinstance(T, Box):
        return float(np.min(T.dist_from(S)))
    d, _ = cKDTree(T).query(S)
    return float(np.min(d))


def excess(S, T) -> float:
    """sup_{s in S} inf_{t in T} |s - t|, with excess(empty, T) = 0.

    Supported pairs: point set or box against point set or box, except a box
    against a finite point set (whose supremum is not attained at vertices).
    """
    S, T = _as_set(S), _as_set(T)
    if _is_empty(T):
        raise InputError("excess(S, empty) is undefined")
    if _is_empty(S):
        return 0.0
    if isinstance(T, Box):
        # distance to a convex set is convex, so a box's sup sits at a vertex
        pts = S.vertices() if isinstance(S, Box) else S
        return float(np.max(T.dist_from(pts)))
    if isinstance(S, Box):
        raise InputError("excess from a box to a finite point set is not supported")
    d, _ = cKDTree(T).query(S)
    return float(np.max(d))


def hausdorff(S, T) -> float:
    return max(excess(S, T), excess(T, S))
