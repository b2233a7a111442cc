"""Half-open dyadic cubes Q = prod_i [j_i 2^-k, (j_i + 1) 2^-k)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, order=True)
class DyadicCube:
    k: int
    j: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "j", tuple(int(v) for v in self.j))

    @classmethod
    def _trusted(cls, k: int, j: tuple) -> DyadicCube:
        """Skip coercion for ints already known to be Python ints."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "j", j)
        return obj

    @property
    def n(self) -> int:
        return len(self.j)

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.k)

    @property
    def diam(self) -> float:
        return math.sqrt(self.n) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.j, dtype=float) + 0.5) * self.side

    def bounds(self):
        lo = np.array(self.j, dtype=float) * self.side
        return lo, lo + self.side

    def parent(self) -> DyadicCube:
        return DyadicCube(self.k - 1, tuple(v >> 1 for v in self.j))

    def ancestor(self, k: int) -> DyadicCube:
        if k > self.k:
            raise ValueError(f"generation {k} is finer than the cube's generation {self.k}")
        shift = self.k - k
        return DyadicCube(k, tuple(v >> shift for v in self.j))

    def children(self) -> list[DyadicCube]:
        base = [2 * v for v in self.j]
        return [
            DyadicCube(self.k + 1, tuple(b + e for b, e in zip(base, bits)))
            for bits in itertools.product((0, 1), repeat=self.n)
        ]

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return cube_at(x, self.k) == self

    def contains(self, other: DyadicCube) -> bool:
        return other.k >= self.k and other.ancestor(self.k) == self

    def to_dict(self):
        return {"k": self.k, "j": list(self.j)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["k"]), tuple(d["j"]))

    def __repr__(self):
        return f"DyadicCube(k={self.k}, j={self.j})"


def lattice_coords(points, k: int) -> np.ndarray:
    """Integer coordinates floor(x 2^k) of the generation-k cubes containing each point.

    Multiplying by a power of two is exact, so the floor realizes the
    half-open convention exactly, including on cube boundaries.
    """
    scaled = np.ldexp(np.asarray(points, dtype=float), k)
    return np.floor(scaled).astype(np.int64)


def cube_at(x, k: int) -> DyadicCube:
    x = np.asarray(x, dtype=float)
    return DyadicCube(k, tuple(lattice_coords(x, k).tolist()))


def parent(Q: DyadicCube) -> DyadicCube:
    return Q.parent()


def children(Q: DyadicCube) -> list[DyadicCube]:
    return Q.children()


def center(Q: DyadicCube) -> np.ndarray:
    return Q.center


def side(Q: DyadicCube) -> float:
    return Q.side
