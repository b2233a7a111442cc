"""Finite grids of bad cones: directions crossed with dyadic openings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Cone, Subspace


@dataclass(frozen=True)
class ConeGrid:
    """Cones ``cones[i] = Cone(directions[i // len(alphas)], alphas[i % len(alphas)])``.

    Ids are positions in ``cones`` (direction-major), stable for identical
    parameters.
    """

    n: int
    m: int
    D: int
    N_alpha: int
    seed: int
    directions: tuple
    alphas: tuple

    @property
    def cones(self) -> list[Cone]:
        return [Cone(V, a) for V in self.directions for a in self.alphas]

    def __len__(self):
        return len(self.directions) * len(self.alphas)

    def __getitem__(self, i) -> Cone:
        return Cone(self.directions[i // len(self.alphas)], self.alphas[i % len(self.alphas)])

    @property
    def descriptor(self) -> dict:
        return {"n": self.n, "m": self.m, "D": self.D, "N_alpha": self.N_alpha, "seed": self.seed}

    def to_dict(self):
        return {
            **self.descriptor,
            "cones": [{"id": i, **X.to_dict()} for i, X in enumerate(self.cones)],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _frames(n: int, m: int, D: int, seed: int) -> list[Subspace]:
    if (n, m) == (2, 1):
        out = []
        for i in range(D):
            t = i * math.pi / D
            out.append(Subspace([[math.cos(t), math.sin(t)]]))
        return out
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(D):
        q, r = np.linalg.qr(rng.standard_normal((n, m)))
        q = q * np.sign(np.diag(r))
        out.append(Subspace(q.T.copy()))
    return out


def cone_grid(n: int, m: int, D: int = 8, N_alpha: int = 2, seed: int = 0) -> ConeGrid:
    """Grid of D directions (m-planes in R^n) times openings 2^j, |j| <= N_alpha.

    In the plane the directions are the lines at angles i pi / D; otherwise
    they are QR-orthonormalized Gaussian frames drawn from ``seed``.
    """
    if not 1 <= m <= n - 1:
        raise InputError(f"need 1 <= m <= n-1, got n={n}, m={m}")
    if D < 1 or N_alpha < 0:
        raise InputError("need D >= 1 and N_alpha >= 0")
    alphas = tuple(math.ldexp(1.0, j) for j in range(-N_alpha, N_alpha + 1))
    return ConeGrid(n, m, D, N_alpha, seed, tuple(_frames(n, m, D, seed)), alphas)


def parse_grid(text: str) -> tuple[int, int]:
    """'D,N_alpha' -> (D, N_alpha)."""
    try:
        D, Na = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"grid must look like 'D,N_alpha', got {text!r}") from exc
    return D, Na
