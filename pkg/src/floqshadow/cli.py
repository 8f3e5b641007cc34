"""Command-line driver.

Exit codes: 0 success, 2 configuration/input error, 3 numerical-consistency
failure (e.g. a non-positive moment or data inconsistent with the noise model).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import RunConfig
from .errors import ConfigError, NumericalError
from .haar import (
    PartitionSpec,
    classify_phase,
    ea_haar,
    haar_p3_negativity,
    haar_pt_moment,
    haar_r2,
    page_renyi2,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_RUN_FLAGS = {
    # flag: (field, type)
    "--L": ("L", int),
    "--tau": ("tau", int),
    "--R": ("R", int),
    "--M": ("M", int),
    "--B": ("B", int),
    "--e01": ("e01", float),
    "--e10": ("e10", float),
    "--calibration-shots": ("calibration_shots", int),
    "--depolarizing": ("depolarizing", float),
    "--n-placements": ("n_placements", int),
    "--J": ("J", float),
    "--T": ("T", float),
    "--seed": ("seed", int),
    "--out": ("out_dir", str),
}


def _shots(raw: str):
    return None if raw.lower() == "exact" else int(raw)


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _points(raw: str) -> list[tuple[int, int, int]]:
    """'1,2,6;3,3,3' -> [(1, 2, 6), (3, 3, 3)]."""
    out = []
    for chunk in raw.split(";"):
        vals = _int_list(chunk)
        if len(vals) != 3:
            raise ConfigError(f"partition {chunk!r} must be L_A,L_B,L_C")
        out.append(vals)
    return out


def _add_run_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", type=Path, help="INI file with a [run] section")
    g.add_argument("--preset", help="per-figure (M, K, R) preset, e.g. fig2 (needs --L)")
    for flag, (_, typ) in _RUN_FLAGS.items():
        g.add_argument(flag, type=typ, default=None)
    g.add_argument("--K", type=_shots, default=argparse.SUPPRESS, help="shots per basis or 'exact'")
    g.add_argument("--taus", type=_int_list, default=None, help="comma-separated cycle counts")
    g.add_argument("--no-readout-correction", action="store_true")
    g.add_argument("--mitigation", action="store_true", help="depolarizing mitigation with a half/half split")


def config_from_args(args) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.load(args.config)
    elif args.preset is not None:
        if args.L is None:
            raise ConfigError("--preset needs --L")
        cfg = RunConfig.preset(args.preset, args.L)
    else:
        cfg = RunConfig()
    changes = {f: getattr(args, flag[2:].replace("-", "_")) for flag, (f, _) in _RUN_FLAGS.items()}
    changes = {k: v for k, v in changes.items() if v is not None}
    if hasattr(args, "K"):
        changes["K"] = args.K
    if args.taus is not None:
        changes["taus"] = args.taus
    if args.no_readout_correction:
        changes["readout_correction"] = False
    if args.mitigation:
        changes["mitigation"] = True
    try:
        return cfg.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _emit(rows: list[dict], stem: Path, columns: list[str]) -> None:
    jl, cs = pipeline.write_table(rows, stem)
    cols = [c for c in columns if any(c in r for r in rows)]
    print("\t".join(cols))
    for r in rows:
        print("\t".join(_fmt(r.get(c)) for c in cols))
    print(f"# wrote {jl} and {cs}", file=sys.stderr)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else str(v)


_PAGE_COLS = ["tau", "observable", "L_A", "variant", "value", "sigma", "exact", "haar", "n_states", "eps"]
_PT_COLS = ["observable", "L_A", "L_B", "L_C", "phase", "variant", "value", "sigma", "exact", "haar", "haar_exact"]


# ---------------------------------------------------------------------------
# verbs


def cmd_generate(args) -> int:
    cfg = config_from_args(args)
    run = pipeline.generate(cfg)
    root = run.save(cfg.out_dir)
    print(f"wrote {len(run.stores)} stores and manifest.json to {root}")
    return EXIT_OK


def _load(run_dir) -> pipeline.Run:
    if not (Path(run_dir) / "manifest.json").exists():
        raise ConfigError(f"{run_dir}: no manifest.json (run 'generate' first)")
    return pipeline.Run.load(run_dir)


def cmd_estimate(args) -> int:
    run = _load(args.run_dir)
    cfg = run.config.replace(mitigation=args.mitigation or run.config.mitigation)
    if args.no_readout_correction:
        cfg = cfg.replace(readout_correction=False)
    run.config = cfg
    out = Path(args.out or Path(args.run_dir) / "tables")
    if args.observable in ("renyi2", "asymmetry", "page"):
        rows = pipeline.page_curve(cfg, run, args.L_A)
        if args.observable != "page":
            rows = [r for r in rows if r["observable"] == args.observable]
        _emit(rows, out / args.observable, _PAGE_COLS)
    else:
        orders = (2, 3) if args.observable == "p3_negativity" else (2, 3, 4)
        points = _points(args.points) if args.points else None
        rows = pipeline.phase_diagram(cfg, points, run, orders)
        if args.observable != "pt":
            rows = [r for r in rows if r["observable"] == args.observable]
        _emit(rows, out / args.observable, _PT_COLS)
    if run.eps_fit:
        print(f"# eps fit: {json.dumps(run.eps_fit)}", file=sys.stderr)
    return EXIT_OK


def cmd_mitigate(args) -> int:
    run = _load(args.run_dir)
    run.config = run.config.replace(mitigation=True)
    rows = pipeline.page_curve(run.config, run)
    out = Path(args.out or Path(args.run_dir) / "tables")
    _emit(rows, out / "mitigated", _PAGE_COLS)
    (out / "eps_fit.json").write_text(json.dumps(run.eps_fit, indent=1))
    print(f"# eps = {run.eps_fit['eps']:.6g} from states {run.eps_fit['source_states']}", file=sys.stderr)
    return EXIT_OK


def cmd_haar(args) -> int:
    L = args.L
    rows = []
    if args.observable in ("page", "ea"):
        for a in range(L + 1):
            v = page_renyi2(L, a) if args.observable == "page" else ea_haar(L, a)
            rows.append({"observable": args.observable, "L": L, "L_A": a, "value": v})
    else:
        points = _points(args.points) if args.points else pipeline.default_grid(L)
        for p in points:
            if sum(p) != L:
                raise ConfigError(f"partition {p} does not sum to L={L}")
            spec = PartitionSpec(*p)
            phase = classify_phase(spec)
            row = {"observable": args.observable, "L": L, "L_A": p[0], "L_B": p[1], "L_C": p[2], "phase": phase.name}
            if args.observable == "r2":
                row.update(value=haar_r2(spec), target=phase.target)
            elif args.observable == "p3_negativity":
                row["value"] = haar_p3_negativity(spec)
            else:
                row.update(k=args.k, value=haar_pt_moment(spec, args.k))
            rows.append(row)
    out = Path(args.out or "haar_tables")
    _emit(rows, out / f"haar_{args.observable}_L{L}", ["observable", "L_A", "L_B", "L_C", "k", "phase", "value", "target"])
    return EXIT_OK


def cmd_certify_design(args) -> int:
    cfg = config_from_args(args)
    rows = pipeline.certify_design(cfg, cfg.taus or None, args.ks)
    _emit(rows, Path(cfg.out_dir) / "design", ["observable", "tau", "L_A", "k", "mean", "sem", "sigma", "haar", "diff"])
    return EXIT_OK


def cmd_dynamics(args) -> int:
    cfg = config_from_args(args)
    rows = pipeline.dynamics(cfg, cfg.taus or None, args.L_A)
    _emit(rows, Path(cfg.out_dir) / "dynamics", _PAGE_COLS)
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    cfg = config_from_args(args)
    points = _points(args.points) if args.points else None
    rows = pipeline.phase_diagram(cfg, points)
    _emit(rows, Path(cfg.out_dir) / "phase_diagram", _PT_COLS)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floqshadow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="prepare states, measure, write stores and manifest")
    _add_run_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate", help="estimate observables from a generated run")
    p.add_argument("run_dir", type=Path)
    p.add_argument(
        "--observable", default="page", choices=["page", "renyi2", "asymmetry", "pt", "r2", "p3_negativity"]
    )
    p.add_argument("--L-A", dest="L_A", type=_int_list, default=None, help="subsystem sizes (entropy tables)")
    p.add_argument("--points", help="partitions 'L_A,L_B,L_C;...' (partial-transpose tables)")
    p.add_argument("--mitigation", action="store_true")
    p.add_argument("--no-readout-correction", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mitigate", help="fit eps on half the run and correct the other half")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("haar", help="Haar-ensemble prediction tables")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--observable", default="page", choices=["page", "ea", "r2", "p3_negativity", "pk"])
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--points")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_haar)

    p = sub.add_parser("certify-design", help="moment distances to the Haar ensemble versus tau")
    _add_run_args(p)
    p.add_argument("--ks", type=_int_list, default=(2, 3, 4))
    p.set_defaults(func=cmd_certify_design)

    p = sub.add_parser("dynamics", help="entropy and asymmetry versus tau")
    _add_run_args(p)
    p.add_argument("--L-A", dest="L_A", type=_int_list, default=None)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("phase-diagram", help="r2 and p3-negativity over (L_A, L_B, L_C)")
    _add_run_args(p)
    p.add_argument("--points")
    p.set_defaults(func=cmd_phase_diagram)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
