"""Nested (eps, R, grid) refinement of the one-vortex sinh-Gordon problem.

    python3 scripts/refinement_study.py --eps 0.2 0.1 0.05 --R 6
"""

import argparse

from swvortex.grid import GridSpec, VortexDivisor
from swvortex.sinh_gordon import SinhGordonProblem, Window, nested_refinement


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--R", type=float, nargs="+", default=[6.0])
    ap.add_argument("--M", type=float, default=0.25)
    ap.add_argument("--n", type=int, default=129)
    ap.add_argument("--multiplicity", type=int, default=2)
    ap.add_argument("--window", type=float, nargs=2, default=[3.0, 0.5], metavar=("OUTER", "INNER"))
    ap.add_argument("--eps-floor", type=float, default=2.0, help="minimum puncture radius in grid steps")
    args = ap.parse_args()

    extent = max(args.R) + 0.2
    base = SinhGordonProblem(
        VortexDivisor.of((0, args.multiplicity)), args.M, 0.0, args.R[0], args.eps[0], GridSpec(extent, args.n),
        eps_floor=args.eps_floor,
    )
    rep = nested_refinement(base, args.eps, args.R, Window(*args.window))
    for (eps, R, n), d in zip(rep.schedule[1:], rep.differences):
        print(f"eps={eps:<6g} R={R:<5g} n={n:<5d} sup|u_k - u_k-1| on window = {d:.4e}")
    print(f"complete={rep.complete} non_increasing={rep.non_increasing}")


if __name__ == "__main__":
    main()
