"""``weakctl`` command line: demo, bound and sweep runs driven by a TOML config.

Exit codes: 0 success, 2 invalid config or arguments, 3 simulation error,
4 disturbance bound violated. Nothing is written unless the config validates.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, WeakControlError
from .scenario import SWEEP_PARAMS, bound_trials, case_study_demo, sweep
from .traceio import (svg_line_chart, trace_filename, write_report, write_rows_csv,
                      write_text, write_trace_csv)

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_BOUND = 0, 2, 3, 4


class _UsageError(Exception):
    pass


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    # accepted before and after the subcommand; the subcommand copy must not
    # clobber a value given up front
    def default(value):
        return argparse.SUPPRESS if suppress else value

    p.add_argument("--out", metavar="DIR", default=default(None),
                   help="output directory (default: the config's output_dir)")
    p.add_argument("--seed", type=int, metavar="INT", default=default(None),
                   help="disturbance seed; first trial seed for bound")
    p.add_argument("--svg", action="store_true", default=default(False),
                   help="also write SVG line charts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakctl", description="Weak-control community energy simulations.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="case A (equal split) against case B (weak control)")
    p.add_argument("config")
    _global_flags(p, suppress=True)

    p = sub.add_parser("bound", help="Monte-Carlo check of the disturbance-suppression bound")
    p.add_argument("config")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--gamma-scale", type=float, default=1.0,
                   help="multiply the designed bounds (values above 1 void the guarantee)")
    p.add_argument("--jobs", type=int, default=1)
    _global_flags(p, suppress=True)

    p = sub.add_parser("sweep", help="one run per parameter value, summarized in a CSV")
    p.add_argument("config")
    p.add_argument("--param", required=True, metavar="NAME", help="one of " + ", ".join(SWEEP_PARAMS))
    p.add_argument("--values", required=True, metavar="LIST", help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    _global_flags(p, suppress=True)
    return parser


def _prepare(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(disturbance=replace(cfg.disturbance, seed=args.seed))
    out = Path(args.out if args.out is not None else cfg.output_dir)
    return cfg, out


def _cmd_demo(cfg: RunConfig, out: Path, args) -> int:
    trace_a, trace_b, report = case_study_demo(cfg)
    rid = cfg.run_id
    t = trace_a.times
    write_trace_csv(trace_a, out / trace_filename(rid, "A"))
    write_trace_csv(trace_b, out / trace_filename(rid, "B"))
    write_rows_csv(
        [{"k": k, "t": t[k], "cost_A": report.cost_a[k], "cost_B": report.cost_b[k]}
         for k in range(len(t))],
        out / trace_filename(rid, "cost"))
    for case, stacked in (("A", report.stacked_a), ("B", report.stacked_b)):
        cols = ["k", "t"] + [f"cum_y_{i + 1}" for i in range(cfg.n)]
        rows = [dict(zip(cols, [k, t[k], *stacked[k]])) for k in range(len(t))]
        write_rows_csv(rows, out / trace_filename(rid, f"stacked_{case}"), cols)
    write_report([f"run_id: {rid}", f"seed: {cfg.disturbance.seed}"] + report.lines(),
                 out / trace_filename(rid, "report", "txt"))
    if args.svg:
        for case, tr in (("A", trace_a), ("B", trace_b)):
            write_text(out / trace_filename(rid, case, "svg"),
                       svg_line_chart(t, {"r": tr.r, "y": tr.y}, title=f"{rid} case {case}"))
        write_text(out / trace_filename(rid, "cost", "svg"),
                   svg_line_chart(t, {"cost A": report.cost_a, "cost B": report.cost_b},
                                  title=f"{rid} cost per step"))
    for line in report.lines()[:6]:
        print(line)
    return EXIT_OK


def _cmd_bound(cfg: RunConfig, out: Path, args) -> int:
    base = cfg.disturbance.seed if args.seed is not None else 0
    seeds = range(base, base + args.trials)
    rows = bound_trials(cfg, args.epsilon, seeds, args.gamma_scale, jobs=args.jobs)
    rid = cfg.run_id
    write_rows_csv(rows, out / trace_filename(rid, "bound"), ["seed", "lhs", "rhs", "ok", "gamma_max"])
    bad = [r for r in rows if not r["ok"]]
    lines = [f"run_id: {rid}", f"epsilon: {args.epsilon:.15g}", f"gamma_scale: {args.gamma_scale:.15g}",
             f"trials: {len(rows)}", f"violations: {len(bad)}",
             f"max_margin: {max(r['lhs'] - r['rhs'] for r in rows):.15g}"]
    if bad:
        lines.append("violating_seeds: " + ", ".join(str(r["seed"]) for r in bad))
    write_report(lines, out / trace_filename(rid, "bound_report", "txt"))
    for line in lines:
        print(line)
    if bad:
        first = bad[0]
        print(f"weakctl: bound violated on seed {first['seed']}: "
              f"{first['lhs']:.6g} > {first['rhs']:.6g}", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def _parse_values(param: str, text: str) -> list:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise _UsageError("--values is empty")
    conv = int if param == "seed" else float
    try:
        return [conv(s) for s in items]
    except ValueError:
        raise _UsageError(f"--values: cannot read {text!r} as a list of {conv.__name__}") from None


def _cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    rows = sweep(cfg, args.param, args.values, jobs=args.jobs)
    path = write_rows_csv(rows, out / trace_filename(cfg.run_id, f"sweep_{args.param}"))
    print(f"rows: {len(rows)}")
    print(f"summary: {path}")
    return EXIT_OK


_COMMANDS = {"demo": _cmd_demo, "bound": _cmd_bound, "sweep": _cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        # everything that can be rejected up front is checked before any output
        if args.command == "sweep":
            if args.param not in SWEEP_PARAMS:
                raise _UsageError(f"unknown sweep parameter {args.param!r}; choose from "
                                  + ", ".join(SWEEP_PARAMS))
            args.values = _parse_values(args.param, args.values)
        if args.command == "bound":
            if not args.epsilon > 0:
                raise _UsageError("--epsilon must be positive")
            if args.trials < 1:
                raise _UsageError("--trials must be >= 1")
        if getattr(args, "jobs", 1) < 1:
            raise _UsageError("--jobs must be >= 1")
        cfg, out = _prepare(args)
    except ConfigError as exc:
        print(f"weakctl: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _UsageError as exc:
        print(f"weakctl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with np.errstate(over="raise", invalid="raise"):
            return _COMMANDS[args.command](cfg, out, args)
    except _UsageError as exc:
        print(f"weakctl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WeakControlError, ArithmeticError, ValueError) as exc:
        print(f"weakctl: simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
