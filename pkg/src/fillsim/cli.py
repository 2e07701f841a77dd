"""Command-line entry point: ``fillsim <subcommand> ...``.

Exit status is 0 on success, 2 on a usage error and 1 on a runtime error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional

from .calibration import calibrate, interarrival_tail_report
from .comparison import TECHNIQUES, run_comparison
from .core import FillSimError
from .engine import drift_after_fills, run_backtest
from .fileio import (
    ConfigError,
    drift_report_text,
    load_config,
    read_events,
    read_lifecycle,
    read_report,
    report_from_lifecycle,
    write_drift,
    write_events,
    write_report,
    write_tail_report,
)
from .market_model import attach_trades, simulate_gchp, simulate_umd
from .theory import drift_report, gchp_drift_report


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _resample(text: str):
    if text in ("event", "0"):
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("resample interval must be positive (or 'event')")
    return v


def _seed_list(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fillsim", description="Limit-order fill modelling and backtesting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate an event stream")
    s.add_argument("--model", choices=("umd", "gchp"), required=True)
    s.add_argument("--config", type=Path)
    s.add_argument("--steps", type=_positive_int, required=True,
                   help="number of events (umd) or moves (gchp)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("theory", help="closed-form drift given a fill")
    s.add_argument("--config", type=Path)
    s.add_argument("--model", choices=("umd", "gchp"), default="umd")

    s = sub.add_parser("calibrate", help="estimate model parameters from events")
    s.add_argument("--events", type=Path, required=True)
    s.add_argument("--lifecycle", type=Path)
    s.add_argument("--resample", type=_resample, help="interval in seconds, or 'event' (default: config resample_s)")
    s.add_argument("--config", type=Path)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("backtest", help="run the market maker over an event file")
    s.add_argument("--events", type=Path, required=True)
    s.add_argument("--technique", choices=("1", "2", "3", "ground-truth"), required=True)
    s.add_argument("--config", type=Path)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("compare", help="all techniques and ground truth over one stream")
    s.add_argument("--events", type=Path, required=True)
    s.add_argument("--config", type=Path)
    s.add_argument("--seeds", type=_seed_list, default=[0])
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("drift", help="mid drift after fills")
    s.add_argument("--report", type=Path, required=True)
    s.add_argument("--events", type=Path, required=True)
    s.add_argument("--window", type=_positive_int, help="events (default: config drift_window)")
    s.add_argument("--config", type=Path)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, required=True)
    return p


def cmd_simulate(args) -> None:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    grid = cfg.grid()
    if args.model == "umd":
        stream = simulate_umd(cfg.model_params(), args.steps, cfg.dt_s, cfg.start_mid, seed=seed, grid=grid)
    else:
        g = cfg.gchp_params()
        # enough horizon for the requested moves at the stationary rate, then trimmed
        horizon = 2.0 * args.steps / g.hawkes.stationary_rate + 10.0
        stream = simulate_gchp(g, horizon, cfg.start_direction(), cfg.start_mid, seed=seed, grid=grid)
        while len(stream) < args.steps:
            horizon *= 2
            stream = simulate_gchp(g, horizon, cfg.start_direction(), cfg.start_mid, seed=seed, grid=grid)
        stream = stream[: args.steps]
    stream = attach_trades(stream, cfg.trade_params(), seed=seed)
    write_events(stream, args.out)
    print(f"wrote {len(stream)} events to {args.out}")


def cmd_theory(args) -> None:
    cfg = load_config(args.config)
    if args.model == "umd":
        report = drift_report(cfg.model_params())
    else:
        report = gchp_drift_report(cfg.gchp_params(), cfg.r_f)
    sys.stdout.write(drift_report_text(report))


def cmd_calibrate(args) -> None:
    cfg = load_config(args.config)
    events = read_events(args.events)
    report = None
    if args.lifecycle is not None:
        report = report_from_lifecycle(read_lifecycle(args.lifecycle, events.grid), events)
    result = calibrate(events, report, cfg.resample_s if args.resample is None else args.resample)
    write_report(result, args.out)
    if report is not None and report.n_fills >= 31:
        write_tail_report(interarrival_tail_report(report.fill_times()), args.out.with_suffix(".tail.txt"))
    print(f"calibrated over {result.n_intervals} intervals; wrote {args.out}")


def cmd_backtest(args) -> None:
    cfg = load_config(args.config)
    events = read_events(args.events, cfg.grid())
    seed = cfg.seed if args.seed is None else args.seed
    report = run_backtest(events, cfg.technique_for(args.technique), cfg.pnl_window_s, seed)
    write_report(report, args.out)
    print(f"{report.technique}: fill_rate={report.n_fills}/{report.n_orders}; wrote {args.out}")


def cmd_compare(args) -> None:
    cfg = load_config(args.config)
    events = read_events(args.events, cfg.grid())
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    header = ["seed", "technique", "n_orders", "n_fills", "global_fill_rate", "final_pnl", "pnl_rms_to_ground_truth",
              "lambda_f", "r_f", "p_fill_down"]
    rows = []
    for seed in args.seeds:
        result = run_comparison(events, cfg.ground_truth(), seed, cfg.pnl_window_s)
        for row in result.summary_rows():
            rows.append([seed, row["technique"], row["n_orders"], row["n_fills"], f"{row['global_fill_rate']:.4f}",
                         repr(row["final_pnl"]), f"{row['pnl_rms_to_ground_truth']:.6f}",
                         f"{result.lambda_f:.6f}", f"{result.r_f:.6f}", f"{result.p_fill_down:.6f}"])
        gt = result.reports["ground_truth"]
        with open(out / f"pnl_windows_seed{seed}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "end_time_s", *TECHNIQUES])
            paths = [result.reports[name].pnl_price(result.reports[name].window_pnl) for name in TECHNIQUES]
            for i, t in enumerate(gt.window_times):
                w.writerow([i, repr(float(t)), *(repr(float(p[i])) for p in paths)])
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    table = "".join(" ".join(str(x).rjust(n) for x, n in zip(r, widths)) + "\n" for r in [header, *rows])
    (out / "comparison.txt").write_text(table)
    sys.stdout.write(table)


def cmd_drift(args) -> None:
    cfg = load_config(args.config)
    events = read_events(args.events)
    report = read_report(args.report, events)
    window = cfg.drift_window if args.window is None else args.window
    seed = cfg.seed if args.seed is None else args.seed
    stats = drift_after_fills(report, events, window, seed)
    write_drift(stats, args.out)
    for name, (mean, se) in stats.summary().items():
        print(f"{name}: mean={mean:.4f} ticks se={se:.4f} n={len(getattr(stats, name))}")


COMMANDS = {
    "simulate": cmd_simulate,
    "theory": cmd_theory,
    "calibrate": cmd_calibrate,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
    "drift": cmd_drift,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"fillsim {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (FillSimError, OSError, ValueError) as exc:
        print(f"fillsim {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
