"""Command line entry point: ``conedini <command> ...``.

Exit status is 0 on success, 1 on bad input or usage, 2 when a checked
contract fails (a patch violating the cone condition, a localization
property failing).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .annulus import rule_for
from .conefamily import cone_grid, parse_grid
from .dyadic import DyadicCube
from .errors import ContractViolation, InputError
from .generators import gen_four_corner, gen_graph, gen_mixture
from .geometry import Cone, Incidence, Subspace
from .lipgraph import LipGraphPatch
from .measure import DEFAULT_DEPTH, AtomicMeasure, load_measure, save_measure
from .pipeline import decompose, extract_graphs, grid_profiles, best_cones


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _direction(n: int, m: int, D: int, index: int, seed: int) -> Subspace:
    grid = cone_grid(n, m, D, 0, seed)
    if not 0 <= index < D:
        raise InputError(f"direction index must lie in [0, {D})")
    return grid.directions[index]


def _load_cone(path: str) -> Cone:
    with open(path) as fh:
        d = json.load(fh)
    if isinstance(d, dict) and "cones" in d:
        raise InputError("expected a single cone; use 'grid --id' to export one")
    return Cone.from_dict(d)


def cmd_gen(a):
    if a.kind == "cantor":
        mu = gen_four_corner(a.depth, K=a.K)
    else:
        D, _ = parse_grid(a.grid)
        V = _direction(a.n if a.kind == "graph" else 2, a.m, D, a.direction, a.seed)
        if a.kind == "graph":
            mu = gen_graph(V, a.lip, a.N, seed=a.seed, K=a.K)
        else:
            mu = gen_mixture(V, a.lip, a.N, a.depth, seed=a.seed, K=a.K)
    if a.output in (None, "-"):
        _write(mu.to_json() + "\n" if a.format == "json" else mu.to_csv(), None)
    else:
        save_measure(mu, a.output)


def cmd_grid(a):
    D, Na = parse_grid(a.grid)
    grid = cone_grid(a.n, a.m, D, Na, a.seed)
    if a.id is None:
        _write(_dumps(grid.to_dict()), a.output)
    else:
        if not 0 <= a.id < len(grid):
            raise InputError(f"cone id must lie in [0, {len(grid)})")
        _write(_dumps(grid[a.id].to_dict()), a.output)


def _grid_for(mu: AtomicMeasure, a):
    D, Na = parse_grid(a.grid)
    return cone_grid(mu.n, a.m, D, Na, a.seed)


def cmd_analyze(a):
    mu = load_measure(a.measure)
    grid = _grid_for(mu, a)
    if len(mu):
        G, best = best_cones(grid_profiles(mu, grid, a.K))
    else:
        G, best = np.zeros(0), np.zeros(0, dtype=np.int64)
    head = ["atom_index"] + [f"x_{i + 1}" for i in range(mu.n)] + ["weight", "label", "cone_id", "K", "dini_value"]
    rows = [",".join(head)]
    for i in range(len(mu)):
        fields = [str(i)] + [repr(float(v)) for v in mu.points[i]] + [
            repr(float(mu.weights[i])), mu.labels[i] or "", str(int(best[i])), str(a.K), repr(float(G[i]))]
        rows.append(",".join(fields))
    _write("\n".join(rows) + "\n", a.output)


def cmd_decompose(a):
    mu = load_measure(a.measure)
    grid = _grid_for(mu, a)
    rep = decompose(mu, grid, a.K, a.theta, seed=a.seed)
    _write(_dumps(rep.to_dict()), a.output)
    if a.output not in (None, "-"):
        print(f"theta={rep.theta!r} carried={rep.mass_carried!r} singular={rep.mass_singular!r}")
        if rep.confusion:
            for label, row in rep.confusion.items():
                print(f"{label}: graph-carried={row['graph-carried']} singular-suspect={row['singular-suspect']}")


def cmd_extract(a):
    mu = load_measure(a.measure)
    X = _load_cone(a.cone)
    if X.n != mu.n:
        raise InputError("cone and measure dimensions differ")
    ex = extract_graphs(mu, X, a.delta, a.K)
    for p in ex.patches:
        res = p.patch.check()
        if not res.ok:
            raise ContractViolation(f"extracted patch violates the cone condition at {res.pair}")
    _write(_dumps(ex.to_list()), a.output)


def cmd_check(a):
    with open(a.patches) as fh:
        data = json.load(fh)
    records = data if isinstance(data, list) else [data]
    bad = 0
    for t, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise InputError("patch records must be JSON objects")
        rec = dict(rec)
        if "anchors" not in rec and "anchor_points" in rec:
            rec["anchors"] = rec["anchor_points"]
        patch = LipGraphPatch.from_dict(rec)
        res = patch.check()
        if res.ok:
            print(f"patch {t}: ok ({len(patch)} anchors)")
        else:
            bad += 1
            print(f"patch {t}: anchors {res.pair[0]} and {res.pair[1]} violate the cone condition")
    if bad:
        raise ContractViolation(f"{bad} of {len(records)} patches fail the cone condition")


def cmd_annulus(a):
    X = _load_cone(a.cone)
    j = tuple(int(v) for v in a.j.split(",")) if a.j else (0,) * X.n
    if len(j) != X.n:
        raise InputError("cube coordinates do not match the cone dimension")
    Q = DyadicCube(a.k, j)
    rule = rule_for(X)
    offsets = rule.offsets()
    codes = rule.codes(offsets)
    head = ["k"] + [f"j_{i + 1}" for i in range(X.n)] + ["conservative"]
    rows = [",".join(head)]
    for d, c in zip(offsets.tolist(), codes.tolist()):
        cube = [str(a.k)] + [str(q + e) for q, e in zip(Q.j, d)]
        rows.append(",".join(cube + [str(int(c == Incidence.AMBIGUOUS))]))
    _write("\n".join(rows) + "\n", a.output)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conedini", description="Conical Dini analysis of atomic measures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, grid=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-K", "--depth", dest="K", type=int, default=DEFAULT_DEPTH, help="dyadic depth")
        sp.add_argument("-o", "--output", default=None)
        if grid:
            sp.add_argument("--grid", default="8,2", help="D,N_alpha")
            sp.add_argument("--m", type=int, default=1, help="graph dimension")

    g = sub.add_parser("gen", help="generate a fixture measure")
    g.add_argument("kind", choices=["graph", "cantor", "mixture"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--depth", type=int, default=4, help="Cantor depth")
    g.add_argument("-K", dest="K", type=int, default=DEFAULT_DEPTH, help="index depth stored with the measure")
    g.add_argument("--n", type=int, default=2)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--N", type=int, default=500, help="graph atoms")
    g.add_argument("--lip", type=float, default=0.125)
    g.add_argument("--grid", default="8,0", help="D,N_alpha of the grid supplying the direction")
    g.add_argument("--direction", type=int, default=0, help="direction index in the grid")
    g.add_argument("--format", choices=["csv", "json"], default="csv", help="format for stdout")
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_gen)

    gr = sub.add_parser("grid", help="export a cone grid or one of its cones")
    gr.add_argument("--n", type=int, default=2)
    gr.add_argument("--id", type=int, default=None)
    common(gr)
    gr.set_defaults(func=cmd_grid)

    an = sub.add_parser("analyze", help="per-atom minimal G^K over a cone grid")
    an.add_argument("measure")
    common(an)
    an.set_defaults(func=cmd_analyze)

    de = sub.add_parser("decompose", help="split into graph-carried and singular parts")
    de.add_argument("measure")
    de.add_argument("--theta", type=float, default=None)
    common(de)
    de.set_defaults(func=cmd_decompose)

    ex = sub.add_parser("extract-graphs", help="draw Lipschitz graphs through the support tree")
    ex.add_argument("measure")
    ex.add_argument("--cone", required=True)
    ex.add_argument("--delta", type=float, default=0.1)
    common(ex, grid=False)
    ex.set_defaults(func=cmd_extract)

    ch = sub.add_parser("check-graph", help="verify the cone condition of patch files")
    ch.add_argument("patches")
    ch.set_defaults(func=cmd_check)

    ann = sub.add_parser("annulus", help="discretized conical annuli")
    ann_sub = ann.add_subparsers(dest="action", required=True, parser_class=_Parser)
    dump = ann_sub.add_parser("dump", help="list the cubes of one discretized annulus")
    dump.add_argument("--cone", required=True)
    dump.add_argument("--k", type=int, default=0)
    dump.add_argument("--j", default=None, help="comma separated lattice coordinates")
    dump.add_argument("-o", "--output", default=None)
    dump.set_defaults(func=cmd_annulus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
