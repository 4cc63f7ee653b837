"""Barrier constants and sign certificates for a punctured-disk problem.

    python3 scripts/barrier_ledger.py --M 0.25 --vortex 0:2
"""

import argparse
import json

from swvortex.config import parse_complex
from swvortex.grid import GridSpec, VortexDivisor
from swvortex.sinh_gordon import SinhGordonProblem, barrier_search, solve_bvp


def _vortex(text: str):
    where, _, mult = text.partition(":")
    return parse_complex(where), int(mult or 1)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=float, default=0.25)
    ap.add_argument("--Mprime", type=float, default=0.0)
    ap.add_argument("--R", type=float, default=6.0)
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--n", type=int, default=129)
    ap.add_argument("--vortex", type=_vortex, action="append", default=None)
    ap.add_argument("--eps-floor", type=float, default=2.0, help="minimum puncture radius in grid steps")
    args = ap.parse_args()

    div = VortexDivisor.of(*(args.vortex or [(0j, 2)]))
    p = SinhGordonProblem(div, args.M, args.Mprime, args.R, args.eps, GridSpec(args.R + 0.2, args.n), eps_floor=args.eps_floor)
    res = solve_bvp(p)
    rep = barrier_search(p, res.h, res.G, res.r)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
