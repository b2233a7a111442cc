"""Dini values on a Lipschitz graph versus a four-corner Cantor set.

Atoms on a graph whose slope is at most half the cone opening never see
mass in their conical annuli, so their truncated Dini values stay at zero
at every depth.  Cantor atoms start seeing mass once the annulus fits
inside the set, and the median value keeps growing with depth.

    python3 demos/graph_vs_cantor.py
"""

import numpy as np

from conedini import Cone, Subspace, gen_four_corner, gen_graph
from conedini.defect import level_defects


def per_atom_dini(mu, X, K):
    """Rows k hold G^k for every atom, built from per-generation defects."""
    rows = [level_defects(mu, X, k)[mu.level(k).atom_cell] for k in range(K + 1)]
    return np.cumsum(rows, axis=0)


def main():
    V = Subspace([[1.0, 0.0]])
    X = Cone(V, 1.0)
    graph = gen_graph(V, 0.5, 1024, seed=1)
    cantor = gen_four_corner(5)
    K = 8
    G_graph = per_atom_dini(graph, X, K)
    G_cantor = per_atom_dini(cantor, X, K)
    print("depth  graph median  graph max  cantor median  cantor max")
    for k in range(K + 1):
        print(f"{k:5d}  {np.median(G_graph[k]):12.3f}  {G_graph[k].max():9.3f}"
              f"  {np.median(G_cantor[k]):13.3f}  {G_cantor[k].max():10.3f}")


if __name__ == "__main__":
    main()
