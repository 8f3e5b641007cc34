"""Entropy and asymmetry versus the number of Floquet cycles.

    python scripts/dynamics.py --L 7 --R 10 --taus 0 1 2 3 5 7 10
"""

import argparse
from pathlib import Path

from floqshadow import pipeline
from floqshadow.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=7)
    ap.add_argument("--R", type=int, default=10)
    ap.add_argument("--M", type=int, default=1000)
    ap.add_argument("--taus", type=int, nargs="+", default=list(range(11)))
    ap.add_argument("--L-A", dest="L_A", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/dynamics"))
    args = ap.parse_args()

    cfg = RunConfig(L=args.L, R=args.R, M=args.M, seed=args.seed)
    rows = pipeline.dynamics(cfg, args.taus, args.L_A)
    for r in rows:
        print(f"tau={r['tau']:2d} {r['observable']:9s} L_A={r['L_A']}  {r['value']:.4f} +- {r['sigma']:.4f}"
              f"  exact {r['exact']:.4f}  haar {r['haar']:.4f}")
    print("wrote", *pipeline.write_table(rows, args.out / f"dynamics_L{args.L}"))


if __name__ == "__main__":
    main()
