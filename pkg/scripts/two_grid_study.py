"""Residual of the explicit divisor family on a sequence of grids.

    python3 scripts/two_grid_study.py --grids 65 129 257 513
"""

import argparse
import json
import math

from swvortex.explicit import FamilyParams, generate_divisor_solution
from swvortex.gauge import residual_maineq
from swvortex.grid import GridSpec, VortexDivisor, square_mask


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[65, 129, 257])
    ap.add_argument("--extent", type=float, default=4.0)
    args = ap.parse_args()

    params = FamilyParams(c1=1, c2=0.5, theta=math.pi / 3, divisor=VortexDivisor.of((0, 1), (1, 2)))
    rows = []
    prev = None
    for n in args.grids:
        s = generate_divisor_solution(square_mask(GridSpec(args.extent, n)), params)
        r = max(residual_maineq(s))
        rows.append({"n": n, "h": 2 * args.extent / (n - 1), "residual": r, "ratio": None if prev is None else prev / r})
        prev = r
    for row in rows:
        ratio = "" if row["ratio"] is None else f"  ratio {row['ratio']:.3f}"
        print(f"n={row['n']:5d}  h={row['h']:.4f}  sup residual {row['residual']:.4e}{ratio}")
    print(json.dumps(rows))


if __name__ == "__main__":
    main()
