"""Command-line interface.

Subcommands: ingest, synth, run, compare, report. Exit codes: 0 success,
2 input error, 3 config error, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timedelta
from pathlib import Path

from .errors import (
    ConfigError,
    DriftcastError,
    EmptySeries,
    GapTooLarge,
    InvalidEvent,
    MismatchedRuns,
    NegativeReading,
    NoCompleteDay,
    NonMonotoneTimestamps,
    TooFewDays,
    UnparseableRow,
)
from .evaluation import EvaluationReport
from .ingest import (
    DailyProfile,
    DriftEvent,
    generate_synthetic,
    parse_load_csv,
    resample_and_fill,
    segment_days,
    write_load_csv,
)
from .pipeline import RunConfig, compare, render_comparison, run

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

_INPUT_ERRORS = (EmptySeries, UnparseableRow, NonMonotoneTimestamps, NegativeReading,
                 GapTooLarge, NoCompleteDay, TooFewDays, InvalidEvent, MismatchedRuns,
                 FileNotFoundError, IsADirectoryError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftcast",
                                     description="Drift-adaptive interval load forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate, fill and segment a CSV stream")
    p_ingest.add_argument("csv", help="input CSV (timestamp, consumption_kwh)")
    p_ingest.add_argument("--out", required=True, help="canonical series CSV to write")
    p_ingest.add_argument("--max-gap", type=int, default=6,
                          help="longest missing run to interpolate (slots)")
    p_ingest.add_argument("--report", help="write the segmentation report JSON here")

    p_synth = sub.add_parser("synth", help="generate a synthetic drifting stream")
    p_synth.add_argument("--profile", required=True, help="profile config JSON")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--days", type=int, required=True)
    p_synth.add_argument("--out", required=True, help="CSV to write")

    p_run = sub.add_parser("run", help="run one forecasting strategy end to end")
    p_run.add_argument("--mode", choices=["baseline", "passive", "active"])
    p_run.add_argument("--tau", type=float)
    p_run.add_argument("--config", help="run config JSON; flags override it")
    p_run.add_argument("--input", required=True, help="canonical series CSV")
    p_run.add_argument("--out", required=True, help="report JSON to write")
    p_run.add_argument("--seed", type=int)

    p_cmp = sub.add_parser("compare", help="compare candidate reports to a baseline")
    p_cmp.add_argument("--baseline", required=True)
    p_cmp.add_argument("--candidate", action="append", required=True)
    p_cmp.add_argument("--out", help="comparison JSON to write")

    p_rep = sub.add_parser("report", help="render a report for reading")
    p_rep.add_argument("--in", dest="path", required=True)
    p_rep.add_argument("--format", choices=["text", "csv"], default="text")
    return parser


def _cmd_ingest(args) -> int:
    series = parse_load_csv(args.csv)
    filled = resample_and_fill(series, args.max_gap)
    segmentation = segment_days(filled)
    write_load_csv(filled, args.out)
    report = segmentation.report()
    report["resolution_minutes"] = filled.resolution.total_seconds() / 60.0
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        spec = json.loads(Path(args.profile).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"profile config is not valid JSON: {exc}") from None
    try:
        profile = DailyProfile(
            base=spec.get("base", 10.0),
            peaks=tuple(tuple(p) for p in spec.get("peaks",
                                                   [[8.0, 2.0, 3.0], [19.0, 3.0, 5.0]])))
        events = [DriftEvent(day=e["day"], kind=e["kind"], magnitude=e["magnitude"])
                  for e in spec.get("events", [])]
        noise_sd = float(spec.get("noise_sd", 0.5))
        resolution = timedelta(minutes=float(spec.get("resolution_minutes", 10)))
        start = datetime.fromisoformat(spec.get("start_time", "2024-01-01T00:00:00"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad profile config: {exc}") from None
    series = generate_synthetic(profile, events, noise_sd=noise_sd, seed=args.seed,
                                n_days=args.days, resolution=resolution,
                                start_time=start)
    write_load_csv(series, args.out)
    print(f"wrote {len(series)} readings over {args.days} days to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config_data = {}
    if args.config:
        try:
            config_data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if args.mode is not None:
        config_data["mode"] = args.mode
    if args.tau is not None:
        config_data["tau"] = args.tau
    if args.seed is not None:
        config_data["seed"] = args.seed
    try:
        config = RunConfig.from_dict(config_data)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    config.validate()

    series = parse_load_csv(args.input)
    report = run(config, series)
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(f"{report.mode}: mean MAPE {report.mean_mape:.2f}%, "
          f"mean RMSE {report.mean_rmse:.3f}, "
          f"{report.adaptation_count} adaptation(s), cost {report.total_cost:.2f}")
    return EXIT_OK


def _load_report(path: str) -> EvaluationReport:
    try:
        return EvaluationReport.from_json(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UnparseableRow(0, f"{path} is not a valid report: {exc}") from None


def _cmd_compare(args) -> int:
    baseline = _load_report(args.baseline)
    candidates = [_load_report(path) for path in args.candidate]
    result = compare(baseline, candidates)
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(render_comparison(result))
    return EXIT_OK


def _cmd_report(args) -> int:
    report = _load_report(args.path)
    if args.format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(["day_index", "mape", "rmse"])
        for entry in report.daily_errors:
            writer.writerow([entry.day_index.isoformat(), repr(entry.mape),
                             repr(entry.rmse)])
        return EXIT_OK
    label = report.mode if report.tau is None else f"{report.mode}(tau={report.tau:g})"
    print(f"run:            {label}")
    print(f"seed:           {report.seed}")
    print(f"split:          {report.split}")
    print(f"test days:      {len(report.daily_errors)}")
    print(f"mean MAPE:      {report.mean_mape:.2f}% (std {report.std_mape:.2f})")
    print(f"mean RMSE:      {report.mean_rmse:.3f} (std {report.std_rmse:.3f})")
    print(f"adaptations:    {report.adaptation_count}")
    print(f"total cost:     {report.total_cost:.2f}")
    drifts = [d for d in report.drift_decisions if d.is_drift]
    if report.drift_decisions:
        print(f"drift days:     {', '.join(d.day_index.isoformat() for d in drifts) or 'none'}")
    return EXIT_OK


_HANDLERS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DriftcastError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
