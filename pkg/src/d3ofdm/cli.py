"""Command-line entry point: ``d3ofdm simulate|theory|complexity|scenarios``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from . import complexity as cx
from .harness import (ConfigError, config_from_dict, dat_label, emit_outputs, load_config,
                      run_experiment, theory_sweep, write_dat, write_theory_csv, THEORY_HEADER)
from .scenarios import FIGURES, SCENARIOS, describe


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _resolve(args) -> "object":
    if args.config:
        cfg = load_config(args.config)
    elif getattr(args, "scenario", None):
        cfg = config_from_dict({"scenario": args.scenario})
    else:
        raise ConfigError("give --config FILE or --scenario NAME")
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    if args.figure:
        return _simulate_figure(args)
    cfg = _resolve(args)
    records = run_experiment(cfg, workers=args.workers, progress=None if args.quiet else _log)
    for p in emit_outputs(records, cfg, args.out, args.overwrite or None):
        _log(f"wrote {p}")
    return 0


def _simulate_figure(args) -> int:
    if args.figure not in FIGURES:
        raise ConfigError(f"unknown figure bundle {args.figure!r}")
    out = Path(args.out or "results")
    columns: dict[str, dict[float, float]] = {}
    for i, (name, tag) in enumerate(FIGURES[args.figure]):
        cfg = config_from_dict({"scenario": name})
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        records = run_experiment(cfg, workers=args.workers, progress=None if args.quiet else _log)
        for p in emit_outputs(records, cfg, out, args.overwrite or None):
            _log(f"wrote {p}")
        for r in records:
            label = dat_label(r.detector) if i == 0 else f"{dat_label(r.detector)}.{tag}"
            columns.setdefault(label, {})[r.snr_db] = r.ber
    path = out / f"{args.figure}.dat"
    write_dat(columns, path, args.overwrite)
    _log(f"wrote {path}")
    return 0


def cmd_theory(args) -> int:
    cfg = _resolve(args)
    rows = theory_sweep(cfg)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{cfg.output.name or cfg.scenario}-theory.csv"
        write_theory_csv(rows, path, args.overwrite)
        _log(f"wrote {path}")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(THEORY_HEADER)
        for row in rows:
            w.writerow([row.get(k, "") for k in THEORY_HEADER])
    return 0


COMPLEXITY_HEADER = ("n", "n_p", "m", "eta_ra", "eta_rm", "r_d_or_eta_rd", "eta_p")


def cmd_complexity(args) -> int:
    w = cx.PowerWeights(*args.weights)
    out = csv.writer(sys.stdout, lineterminator="\n")
    if args.tables:
        out.writerow(("table",) + COMPLEXITY_HEADER + ("ref_eta_ra", "ref_eta_rm",
                                                       "ref_r_d_or_eta_rd", "ref_eta_p"))
        for row in cx.table_rows(w):
            ref = cx.reference_values(row)
            out.writerow([row.label, row.n, row.n_p, row.m, _g(row.eta_ra), _g(row.eta_rm),
                          _g(row.r_d_or_eta_rd), _g(row.eta_p)] + [_g(v) for v in ref])
        return 0
    if args.n is None or args.np is None or args.m is None:
        raise ConfigError("complexity needs --n, --np and --m (or --tables)")
    row = cx.compare(args.n, args.np, args.m, args.modulus, w)
    out.writerow(COMPLEXITY_HEADER)
    out.writerow([row.n, row.n_p, row.m, _g(row.eta_ra), _g(row.eta_rm),
                  _g(row.r_d_or_eta_rd), _g(row.eta_p)])
    return 0


def _g(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def cmd_scenarios(args) -> int:
    for name in SCENARIOS:
        print(f"{name:24s} {describe(name)}")
    print()
    for fig, members in FIGURES.items():
        print(f"{fig:24s} bundle: {', '.join(m for m, _ in members)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d3ofdm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    s.add_argument("--config", help="JSON experiment config")
    s.add_argument("--scenario", help="built-in scenario name (instead of --config)")
    s.add_argument("--figure", help="run every scenario of a figure bundle")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="output directory (default: config output.dir)")
    s.add_argument("--overwrite", action="store_true", help="replace existing output files")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("theory", help="analytical error rates over the config's SNR grid")
    t.add_argument("--config")
    t.add_argument("--scenario")
    t.add_argument("--out", help="write <name>-theory.csv here instead of stdout")
    t.add_argument("--overwrite", action="store_true")
    t.set_defaults(func=cmd_theory)

    c = sub.add_parser("complexity", help="operation-count ratios of the adjacent-difference "
                                          "detector against the pilot-aided receiver")
    c.add_argument("--n", type=int)
    c.add_argument("--np", type=int)
    c.add_argument("--m", type=int)
    c.add_argument("--modulus", choices=("CM", "QAM"), default="CM")
    c.add_argument("--tables", action="store_true", help="emit all reference tables with the "
                                                          "reference values alongside")
    c.add_argument("--weights", type=float, nargs=3, default=(1.0, 3.0, 24.0),
                   metavar=("ADD", "MUL", "DIV"))
    c.set_defaults(func=cmd_complexity)

    sc = sub.add_parser("scenarios", help="list built-in scenarios and figure bundles")
    sc.add_argument("--list", action="store_true", default=True)
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileExistsError, PermissionError, ValueError) as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
