"""Raw versus readout-corrected entropy and asymmetry as the shot count grows.

    python scripts/readout_study.py --K 1000 5000 10000
"""

import argparse
from pathlib import Path

from floqshadow import pipeline
from floqshadow.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=7)
    ap.add_argument("--R", type=int, default=30)
    ap.add_argument("--M", type=int, default=1000)
    ap.add_argument("--K", type=int, nargs="+", default=[1000, 5000, 10000])
    ap.add_argument("--L-A", dest="L_A", type=int, nargs="+", default=[1, 4, 7])
    ap.add_argument("--e01", type=float, default=0.007)
    ap.add_argument("--e10", type=float, default=0.011)
    ap.add_argument("--calibration-shots", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/readout"))
    args = ap.parse_args()

    rows = []
    for K in args.K:
        cfg = RunConfig(L=args.L, R=args.R, M=args.M, K=K, e01=args.e01, e10=args.e10,
                        calibration_shots=args.calibration_shots, seed=args.seed)
        for r in pipeline.page_curve(cfg, L_As=args.L_A):
            rows.append({"K": K, **r})
            print(f"K={K:6d} {r['observable']:9s} L_A={r['L_A']} {r['variant']:9s}"
                  f" {r['value']:.4f} +- {r['sigma']:.4f}  exact {r['exact']:.4f}")
    print("wrote", *pipeline.write_table(rows, args.out / "readout"))


if __name__ == "__main__":
    main()
