"""r2 and p3-negativity over the (L_A, L_B, L_C) grid, next to the Haar predictions.

The full L=9 grid takes tens of minutes; pass --points to restrict it.

    python scripts/phase_diagram.py --L 9 --points "3,3,3;2,2,5"
"""

import argparse
from pathlib import Path

from floqshadow import pipeline
from floqshadow.cli import _points
from floqshadow.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=9)
    ap.add_argument("--R", type=int, default=20)
    ap.add_argument("--M", type=int, default=1000)
    ap.add_argument("--K", type=int, default=None)
    ap.add_argument("--n-placements", type=int, default=1)
    ap.add_argument("--points", help="'L_A,L_B,L_C;...' (default: every partition)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/phase"))
    args = ap.parse_args()

    cfg = RunConfig(L=args.L, R=args.R, M=args.M, K=args.K, n_placements=args.n_placements, seed=args.seed)
    rows = pipeline.phase_diagram(cfg, _points(args.points) if args.points else None)
    for r in rows:
        print(f"{r['observable']:13s} ({r['L_A']},{r['L_B']},{r['L_C']}) {r['phase']:6s}"
              f" {r['value']:.4f} +- {r['sigma']:.4f}  haar {r['haar']:.4f}")
    print("wrote", *pipeline.write_table(rows, args.out / f"phase_L{args.L}"))


if __name__ == "__main__":
    main()
