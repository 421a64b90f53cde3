from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import (
    ConfigError,
    ExperimentConfig,
    default_config_path,
    default_run_log_path,
    load_config,
    parse_order,
    preset,
    with_overrides,
    write_default_config,
)
from .estimator import EstimatorError, fit_global, load_dataset_csv, truncation_level
from .frame import FrameError, build_frame
from .runlog import RunLog
from .sim import (
    SimulationError,
    curve_emit,
    fitted_curve,
    load_report,
    render_report,
    report_emit,
    run_experiment,
)
from .window import PARTITION_TOLERANCE, WindowError, build_window, check_partition_of_unity

PACKAGE_ERRORS = (ConfigError, EstimatorError, FrameError, SimulationError, WindowError)


def positive_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("value must be an integer") from exc
    if parsed <= 0:
        raise argparse.ArgumentTypeError("value must be greater than 0")
    return parsed


def scale(value: str) -> float:
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("B must be a number") from exc
    if parsed <= 1:
        raise argparse.ArgumentTypeError("B must be greater than 1")
    return parsed


def order(value: str) -> float:
    try:
        return parse_order(value if value == "inf" else float(value))
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError("p must be a number >= 2 or inf") from exc


def noise_fraction(value: str) -> float:
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("sigma fraction must be a number") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("sigma fraction must be non-negative")
    return parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="needlet-regression",
        description="Needlet regression on the circle and sphere with global level thresholding.",
    )
    parser.add_argument("--run-log", type=Path, default=default_run_log_path(), help="Run log path (JSON lines).")
    parser.add_argument("--seed", type=int, default=None, help="Override the configured base seed.")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Diagnostic logging level.",
    )

    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    init_parser = subparsers.add_parser("init", help="Create a default experiment config.")
    init_parser.add_argument("--config", type=Path, default=default_config_path(), help="Config JSON path.")
    init_parser.add_argument("--force", action="store_true", help="Overwrite an existing config.")

    window_parser = subparsers.add_parser("window-check", help="Check the window's partition of unity.")
    window_parser.add_argument("--B", dest="B", type=scale, default=2.0, help="Scale parameter B > 1.")
    window_parser.add_argument("--ell-max", type=positive_int, default=512, help="Largest frequency checked.")
    window_parser.add_argument("--variant", choices=["smooth_bump", "bspline"], default="smooth_bump")

    fit_parser = subparsers.add_parser("fit", help="Fit the global thresholding estimator to circle data.")
    fit_parser.add_argument("--config", type=Path, default=default_config_path(), help="Config JSON path.")
    fit_parser.add_argument("--data", type=Path, required=True, help="CSV with columns x, y.")
    fit_parser.add_argument("--p", type=order, default=None, help="Threshold order (even integer, real > 2, or inf).")
    fit_parser.add_argument("--J", dest="J", type=int, default=None, help="Truncation level; default floor(log_B n).")
    fit_parser.add_argument("--out", type=Path, default=None, help="Write the estimate coefficients as CSV.")

    sim_parser = subparsers.add_parser("simulate", help="Run a Monte Carlo risk experiment.")
    source = sim_parser.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--preset", help="example-4.1, example-4.2 or example-4.3 (aliases: constant, single-mode, mixed)."
    )
    source.add_argument("--config", type=Path, help="Config JSON path.")
    sim_parser.add_argument("--replicates", type=positive_int, default=None, help="Replicates per cell.")
    sim_parser.add_argument("--out", type=Path, default=None, help="Report path; stdout when omitted.")
    sim_parser.add_argument("--format", choices=["csv", "json"], default="csv")

    curve_parser = subparsers.add_parser("curve", help="Write truth and fitted curves for one replicate as CSV.")
    curve_source = curve_parser.add_mutually_exclusive_group(required=True)
    curve_source.add_argument("--preset", help="Preset name, as for simulate.")
    curve_source.add_argument("--config", type=Path, help="Config JSON path.")
    curve_parser.add_argument(
        "--n", dest="n", type=positive_int, required=True, help="One of the configured sample sizes."
    )
    curve_parser.add_argument(
        "--sigma-frac", type=noise_fraction, required=True, help="One of the configured noise fractions."
    )
    curve_parser.add_argument("--replicate", type=int, default=0, help="Replicate index within the cell.")
    curve_parser.add_argument("--out", type=Path, default=None, help="CSV path; stdout when omitted.")

    report_parser = subparsers.add_parser("report", help="Convert a JSON risk report or rebuild one from a run log.")
    report_parser.add_argument(
        "--in", dest="source", type=Path, required=True, help="JSON report or run log path."
    )
    report_parser.add_argument("--run", default=None, help="Run id to rebuild; the latest run when omitted.")
    report_parser.add_argument("--format", choices=["csv", "json"], default="csv")
    report_parser.add_argument("--out", type=Path, default=None, help="Output path; stdout when omitted.")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")

    if args.subcommand == "init":
        write_default_config(args.config, overwrite=args.force)
        print(f"Config ready: {args.config}")
        return 0

    try:
        if args.subcommand == "window-check":
            return handle_window_check(args)
        if args.subcommand == "fit":
            return handle_fit(args)
        if args.subcommand == "simulate":
            return handle_simulate(args)
        if args.subcommand == "curve":
            return handle_curve(args)
        if args.subcommand == "report":
            return handle_report(args)
    except PACKAGE_ERRORS as exc:
        print(str(exc), file=sys.stderr)
        return 1

    print("Unsupported command.", file=sys.stderr)
    return 2


def handle_window_check(args: argparse.Namespace) -> int:
    window = build_window(args.B, variant=args.variant)
    error = check_partition_of_unity(window, args.ell_max)
    print(f"B: {args.B}")
    print(f"ell_max: {args.ell_max}")
    print(f"max_error: {error:.3e}")
    return 0 if error <= PARTITION_TOLERANCE else 1


def handle_fit(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    data = load_dataset_csv(args.data)
    if data.n < 2:
        raise EstimatorError("fit needs at least 2 observations")
    p = cfg.p if args.p is None else args.p
    J = truncation_level(data.n, cfg.B, 1) if args.J is None else args.J
    if J < 0:
        raise EstimatorError("truncation level must be non-negative")
    window = build_window(cfg.B, variant=cfg.window)
    frame = build_frame(1, cfg.B, J, window, max_centers=cfg.max_centers)
    estimate = fit_global(frame, data, p=p, J=J)
    report = estimate.report.to_dict()
    RunLog(args.run_log).fit(
        {"data": str(args.data), "n": data.n, "selected": list(estimate.report.selected), **report}
    )
    if args.out is not None:
        estimate.to_csv(args.out)
    print(json.dumps(report, indent=2))
    return 0


def handle_simulate(args: argparse.Namespace) -> int:
    cfg: ExperimentConfig = preset(args.preset) if args.preset else load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, replicates=args.replicates, output=args.out)
    report = run_experiment(cfg, run_log=args.run_log)
    if cfg.output is None:
        print(render_report(report, args.format), end="")
        return 0
    report_emit(report, cfg.output, args.format)
    print(f"Report written: {cfg.output}")
    return 0


def handle_curve(args: argparse.Namespace) -> int:
    cfg: ExperimentConfig = preset(args.preset) if args.preset else load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed)
    table = fitted_curve(cfg, args.n, args.sigma_frac, args.replicate)
    if args.out is None:
        print(table.to_csv(), end="")
        return 0
    curve_emit(table, args.out)
    print(f"Curve written: {args.out} (J_n={table.J_n}, selected={list(table.selected)})")
    return 0


def handle_report(args: argparse.Namespace) -> int:
    report = load_report(args.source, run_id=args.run)
    if not report.complete:
        print(f"Warning: run is incomplete ({len(report.cells)} cells recovered)", file=sys.stderr)
    if args.out is None:
        print(render_report(report, args.format), end="")
        return 0
    report_emit(report, args.out, args.format)
    print(f"Report written: {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
