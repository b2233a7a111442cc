"""Finite atomic measures with an exact dyadic mass index."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicCube, lattice_coords
from .errors import InputError

DEFAULT_DEPTH = 8


@dataclass
class Level:
    """Nonempty cubes of one generation.

    ``cells`` holds the lattice coordinates in lexicographic order,
    ``masses`` their exact masses and ``atom_cell`` the row of ``cells``
    that contains each atom.
    """

    k: int
    cells: np.ndarray
    masses: np.ndarray
    atom_cell: np.ndarray
    lookup: dict

    def mass_of(self, j) -> float:
        idx = self.lookup.get(tuple(j))
        return 0.0 if idx is None else float(self.masses[idx])


class AtomicMeasure:
    """mu = sum_i w_i delta_{x_i} with strictly positive weights.

    Masses of dyadic cubes of generations 0..K are indexed at construction.
    Cube sums use ``math.fsum``, which is correctly rounded, so an indexed
    mass equals a direct scan of the atoms bit for bit.
    """

    def __init__(self, points, weights=None, labels=None, K: int = DEFAULT_DEPTH, n: int | None = None):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            if n is None:
                n = pts.shape[-1] if pts.ndim == 2 else None
            if not n:
                raise InputError("an empty measure needs its ambient dimension n")
            pts = pts.reshape(0, n)
        if pts.ndim != 2:
            raise InputError("points must be an (N, n) array")
        if n is not None and pts.shape[1] != n:
            raise InputError(f"points live in R^{pts.shape[1]}, expected R^{n}")
        if not np.all(np.isfinite(pts)):
            raise InputError("atom coordinates must be finite")
        N = pts.shape[0]
        w = np.ones(N) if weights is None else np.array(weights, dtype=float).reshape(-1)
        if w.shape != (N,):
            raise InputError(f"expected {N} weights, got {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise InputError("weights must be finite and strictly positive")
        if labels is None:
            labels = (None,) * N
        labels = tuple(None if (lab is None or lab == "") else str(lab) for lab in labels)
        if len(labels) != N:
            raise InputError(f"expected {N} labels, got {len(labels)}")
        if K < 0:
            raise InputError("index depth K must be nonnegative")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.labels = labels
        self.K = int(K)
        self._levels: dict[int, Level] = {}
        for k in range(self.K + 1):
            self.level(k)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def level(self, k: int) -> Level:
        lev = self._levels.get(k)
        if lev is None:
            lev = self._build_level(k)
            self._levels[k] = lev
        return lev

    def _build_level(self, k: int) -> Level:
        if len(self) == 0:
            empty = np.empty((0, self.n), dtype=np.int64)
            return Level(k, empty, np.empty(0), np.empty(0, dtype=np.int64), {})
        keys = lattice_coords(self.points, k)
        cells, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        splits = np.cumsum(np.bincount(inverse, minlength=len(cells)))[:-1]
        groups = np.split(self.weights[order], splits)
        masses = np.array([math.fsum(g) for g in groups])
        lookup = {tuple(c): i for i, c in enumerate(cells.tolist())}
        return Level(k, cells, masses, inverse, lookup)

    def mass(self, Q: DyadicCube) -> float:
        """mu(Q) for a half-open dyadic cube."""
        if Q.n != self.n:
            raise InputError("cube and measure dimensions differ")
        if 0 <= Q.k <= self.K:
            return self.level(Q.k).mass_of(Q.j)
        return self.mass_direct(Q)

    def mass_direct(self, Q: DyadicCube) -> float:
        if len(self) == 0:
            return 0.0
        inside = np.all(lattice_coords(self.points, Q.k) == np.array(Q.j), axis=1)
        return math.fsum(self.weights[inside])

    def atoms_in(self, Q: DyadicCube) -> np.ndarray:
        if len(self) == 0:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(np.all(lattice_coords(self.points, Q.k) == np.array(Q.j), axis=1))

    def label_mask(self, label: str) -> np.ndarray:
        return np.array([lab == label for lab in self.labels], dtype=bool)

    def ball_mass(self, center, radius: float, mask=None) -> float:
        """mu(B(center, radius) intersected with the atoms selected by mask)."""
        if len(self) == 0:
            return 0.0
        inside = np.linalg.norm(self.points - np.asarray(center, dtype=float), axis=1) <= radius
        if mask is not None:
            inside &= np.asarray(mask, dtype=bool)
        return math.fsum(self.weights[inside])

    def subset(self, idx) -> AtomicMeasure:
        idx = np.asarray(idx, dtype=np.int64)
        return AtomicMeasure(
            self.points[idx], self.weights[idx], [self.labels[i] for i in idx], K=self.K, n=self.n
        )

    def restrict(self, E) -> AtomicMeasure:
        """mu restricted to E.

        ``E`` is a boolean mask over atoms or a callable ``E(x, weight, label)``.
        """
        if callable(E):
            mask = np.array(
                [bool(E(x, w, lab)) for x, w, lab in zip(self.points, self.weights, self.labels)],
                dtype=bool,
            )
        else:
            mask = np.asarray(E, dtype=bool).reshape(-1)
            if mask.shape != (len(self),):
                raise InputError("restriction mask must have one entry per atom")
        return self.subset(np.flatnonzero(mask))

    def __eq__(self, other):
        return (
            isinstance(other, AtomicMeasure)
            and self.n == other.n
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
            and self.labels == other.labels
        )

    def __repr__(self):
        return f"AtomicMeasure(n={self.n}, atoms={len(self)}, mass={self.total_mass!r}, K={self.K})"

    # serialization

    def to_csv(self) -> str:
        lines = [f"# n={self.n} K={self.K}"]
        with_labels = any(lab is not None for lab in self.labels)
        for x, w, lab in zip(self.points.tolist(), self.weights.tolist(), self.labels):
            fields = [repr(v) for v in x] + [repr(w)]
            if with_labels:
                fields.append(lab or "")
            lines.append(",".join(fields))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> AtomicMeasure:
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or not lines[0].startswith("#"):
            raise InputError("measure CSV must start with a '# n=<n> K=<K>' header")
        head = dict(re.findall(r"(\w+)=(-?\d+)", lines[0]))
        if "n" not in head:
            raise InputError("measure CSV header lacks n=<n>")
        n = int(head["n"])
        K = int(head.get("K", DEFAULT_DEPTH))
        pts, ws, labs = [], [], []
        for lineno, ln in enumerate(lines[1:], start=2):
            if ln.startswith("#"):
                continue
            fields = ln.split(",")
            if len(fields) not in (n + 1, n + 2):
                raise InputError(f"line {lineno}: expected {n + 1} or {n + 2} fields, got {len(fields)}")
            try:
                pts.append([float(v) for v in fields[:n]])
                ws.append(float(fields[n]))
            except ValueError as exc:
                raise InputError(f"line {lineno}: {exc}") from exc
            labs.append(fields[n + 1].strip() if len(fields) == n + 2 else None)
        return cls(np.array(pts, dtype=float).reshape(-1, n), ws, labs, K=K, n=n)

    def to_dict(self):
        return {
            "n": self.n,
            "K": self.K,
            "atoms": [
                {"x": x, "weight": w, "label": lab}
                for x, w, lab in zip(self.points.tolist(), self.weights.tolist(), self.labels)
            ],
        }

    @classmethod
    def from_dict(cls, d) -> AtomicMeasure:
        try:
            n = int(d["n"])
            atoms = d["atoms"]
            pts = np.array([a["x"] for a in atoms], dtype=float).reshape(-1, n)
            ws = [a["weight"] for a in atoms]
            labs = [a.get("label") for a in atoms]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed measure record: {exc}") from exc
        return cls(pts, ws, labs, K=int(d.get("K", DEFAULT_DEPTH)), n=n)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> AtomicMeasure:
        return cls.from_dict(json.loads(text))


def mass(mu: AtomicMeasure, Q: DyadicCube) -> float:
    return mu.mass(Q)


def restrict(mu: AtomicMeasure, E) -> AtomicMeasure:
    return mu.restrict(E)


def load_measure(path) -> AtomicMeasure:
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return AtomicMeasure.from_json(text)
    return AtomicMeasure.from_csv(text)


def save_measure(mu: AtomicMeasure, path) -> None:
    text = mu.to_json() if str(path).endswith(".json") else mu.to_csv()
    with open(path, "w") as fh:
        fh.write(text)
