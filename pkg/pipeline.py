"""
Command-line front end: simulate, analyze, design, sweep and fom.

Exit codes: 0 success (and lock, for simulate), 2 a completed run that did
not lock, 1 any configuration, input or simulation error.
"""
import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import pandas as pd

from analysis.fom import FomInputs, fom_ja
from analysis.linear import build_loop_model, design_report
from analysis.report import summarize
from excel_io.excel_writer import write_sweep_sheet
from loop.engine import run_transient
from model.config import SimConfig, config_keys, load_config, numeric_keys, validate, with_value
from model.errors import IssPllError
from model.trace import read_trace_csv, write_trace_csv
from utils import format_report, rows_to_frame, sweep_points, write_report

EXIT_OK, EXIT_ERROR, EXIT_NO_LOCK = 0, 1, 2

SWEEP_CHARTS = ["sigma_s", "spur_dbc", "lock_time_s", "f_error_ppm", "k_pd_i_A_per_rad"]


def simulate_to(cfg: SimConfig, out_dir: Path) -> dict:
    """
    Run one transient, write trace.csv and summary.txt. The summary is
    computed from the trace as read back, so `analyze` reproduces it.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_transient(cfg)
    trace_path = write_trace_csv(out_dir / "trace.csv", result.trace)
    summary = summarize(read_trace_csv(trace_path), cfg)
    write_report(out_dir / "summary.txt", summary)
    print(f"Wrote {trace_path}")
    print(f"Wrote {out_dir / 'summary.txt'}")
    return summary


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration"] = args.duration
    if changes:
        cfg = replace(cfg, **changes)
    summary = simulate_to(cfg, Path(args.out))
    return EXIT_OK if summary["locked"] else EXIT_NO_LOCK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    summary = summarize(read_trace_csv(args.trace), cfg)
    out = Path(args.out) / "summary.txt"
    write_report(out, summary)
    print(f"Wrote {out}")
    return EXIT_OK


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    sys.stdout.write(format_report(design_report(cfg)))
    return EXIT_OK


def cmd_fom(args) -> int:
    res = fom_ja(FomInputs(args.sigma, args.power, args.area))
    print(f"fom_ja_db={res.fom_ja_db:.1f}")
    print(f"fom_db={res.fom_db:.1f}")
    return EXIT_OK


def _sweep_point(cfg: SimConfig, param: str, value: float) -> dict:
    point = with_value(cfg, param, value)
    result = run_transient(point)
    row = {param: value}
    row.update(summarize(result.frame(), point))
    row["k_pd_i_A_per_rad"] = build_loop_model(point).k_pd_i
    return row


def cmd_sweep(args) -> int:
    if args.param not in numeric_keys():
        raise IssPllError(f"--param '{args.param}' is not a numeric config key "
                          f"(choose from: {', '.join(numeric_keys())})")
    cfg = load_config(args.config)
    values = sweep_points(args.start, args.stop, args.steps)
    # validate every point before spending time on any run
    for v in values:
        bad = validate(with_value(cfg, args.param, v))
        if bad:
            raise IssPllError(f"{args.param}={v:g}: " + "; ".join(map(str, bad)))

    if args.workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, [cfg] * len(values), [args.param] * len(values), values))
    else:
        rows = [_sweep_point(cfg, args.param, v) for v in values]
    sweep = rows_to_frame(rows, args.param)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    csv_path.write_text(sweep.to_csv(index=False, float_format="%.17g", na_rep="nan"))
    print(f"Wrote {csv_path}")

    xlsx_path = out_dir / "sweep.xlsx"
    writer = pd.ExcelWriter(xlsx_path, engine="xlsxwriter")
    write_sweep_sheet(writer, f"sweep {args.param}", sweep, args.param,
                      title=f"ISSPLL sweep of {args.param} ({len(values)} points, seed {cfg.seed})",
                      charted=SWEEP_CHARTS,
                      notes=[f"config: {args.config}", "nan marks a metric the run was too short to measure"])
    writer.close()
    print(f"Wrote {xlsx_path}")
    return EXIT_OK


def _config_epilog() -> str:
    lines = ["config keys (section / key [unit] default: description):"]
    for sec, key, unit, help_, default in config_keys():
        lines.append(f"  {sec:8s} {key:20s} [{unit}] {default}: {help_}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isspll", description="Integrating sub-sampling PLL behavioral simulator",
                                epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at DEBUG level")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one transient and write trace.csv and summary.txt")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--duration", type=float, default=None, help="simulated time in seconds")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="recompute summary.txt from an existing trace.csv")
    a.add_argument("--config", required=True, type=Path)
    a.add_argument("--trace", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("design", help="print the linear loop design report")
    d.add_argument("--config", required=True, type=Path)
    d.set_defaults(func=cmd_design)

    w = sub.add_parser("sweep", help="simulate a range of one numeric config key")
    w.add_argument("--config", required=True, type=Path)
    w.add_argument("--param", required=True)
    w.add_argument("--from", dest="start", required=True, type=float)
    w.add_argument("--to", dest="stop", required=True, type=float)
    w.add_argument("--steps", required=True, type=int)
    w.add_argument("--out", required=True, type=Path)
    w.add_argument("--workers", type=int, default=1, help="parallel simulation processes")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fom", help="print the jitter-power figures of merit")
    f.add_argument("--sigma", required=True, type=float, help="rms jitter in seconds")
    f.add_argument("--power", required=True, type=float, help="power in watts")
    f.add_argument("--area", required=True, type=float, help="area in mm^2")
    f.set_defaults(func=cmd_fom)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors share the error code; 2 is reserved for "no lock"
        return EXIT_OK if e.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IssPllError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
