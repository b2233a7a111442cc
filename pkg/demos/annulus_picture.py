"""Draw the discretized conical annulus of one lattice cube.

Writes the member offsets to a CSV (code 2 marks cubes admitted only by
the conservative branch of the box-versus-cone test) and prints a coarse
character picture of the pattern around the cube.

    python3 demos/annulus_picture.py [alpha] [angle_degrees] [out.csv]
"""

import csv
import math
import sys

import numpy as np

from conedini import Cone, Subspace, rule_for


def main(argv):
    alpha = float(argv[0]) if argv else 1.0
    angle = math.radians(float(argv[1])) if len(argv) > 1 else 30.0 * math.pi / 180
    out = argv[2] if len(argv) > 2 else "annulus.csv"
    X = Cone(Subspace([[math.cos(angle), math.sin(angle)]]), alpha)
    rule = rule_for(X)
    D = rule.offsets()
    codes = rule.codes(D)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_1", "d_2", "code"])
        w.writerows([*d, c] for d, c in zip(D.tolist(), codes.tolist()))
    print(f"alpha={alpha} r={rule.r:.1f} members={len(D)} conservative={int(np.sum(codes == 2))} -> {out}")

    # one character per block of lattice cells; '#' if any cell of the block is a member
    reach = rule.box_radius
    block = max(1, (2 * reach + 1) // 60)
    size = (2 * reach + 1) // block + 1
    pic = np.full((size, size), " ")
    idx = (D + reach) // block
    pic[idx[:, 1], idx[:, 0]] = "#"
    pic[reach // block, reach // block] = "o"
    for row in pic[::-1]:
        print("".join(row))


if __name__ == "__main__":
    main(sys.argv[1:])
