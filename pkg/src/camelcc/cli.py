"""Command-line front end: run scenarios, the signal comparison, sweeps.

Outputs are written atomically (temp file then rename) so a failed run
leaves nothing partial behind. Exit codes: 0 success, 2 scenario/argument
error, 3 runtime invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import metrics, plotting
from .core import US_PER_S, InvariantViolation
from .experiments import SignalExpConfig, run_signal_experiment
from .netsim import RunLog, ScenarioConfig, run
from .scenario import ScenarioError, apply_override, load_scenario

log = logging.getLogger("camelcc")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3

SNAPSHOT_COLUMNS = [
    "time_us", "flow", "mode", "cwnd_bytes", "inflight_bytes", "gamma",
    "burst_cap_bytes", "avg_bw_bps", "reported_bw_bps", "min_delay_us",
    "queue_bytes", "pending_frames", "app_drops", "fallback_entries",
]


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runlog_csv(runlog: RunLog, path: str) -> None:
    lines = ["# schema=1", ",".join(SNAPSHOT_COLUMNS)]
    for s in runlog.snapshots:
        lines.append(",".join(_fmt(v) for v in (
            s.time, s.flow, s.mode, s.cwnd, s.inflight, s.gamma, s.burst_cap,
            s.avg_bw, s.reported_bw, s.min_delay, s.queue_bytes,
            s.pending_frames, s.app_drops, s.fallback_entries)))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_metrics_json(report: dict, path: str) -> None:
    _atomic_write(path, json.dumps(report, sort_keys=True, indent=2) + "\n")


def _run_scenario(scenario: ScenarioConfig, out_dir: str, figures: bool) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    runlog = run(scenario)
    report = metrics.compute_report(runlog, scenario)
    write_runlog_csv(runlog, os.path.join(out_dir, "runlog.csv"))
    write_metrics_json(report, os.path.join(out_dir, "metrics.json"))
    if figures:
        plotting.render_run_figures(runlog, scenario, out_dir)
    return report


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            scenario.seed = args.seed
    except ScenarioError as exc:
        log.error("scenario error: %s", exc)
        return EXIT_USAGE
    try:
        report = _run_scenario(scenario, args.out, not args.no_figures)
    except InvariantViolation as exc:
        log.error("invariant violation: %s", exc)
        return EXIT_INVARIANT
    stalls = [v for k, v in report.items() if k.startswith("stalling_ratio")]
    accs = [v for k, v in report.items() if k.startswith("bw_estimation_accuracy")]
    print(f"{scenario.name}: media {report['media_bitrate_bps'] / 1000:.0f} kbps, "
          f"stall {max(stalls) if stalls else 0:.3f}, "
          f"bw accuracy {sum(accs) / len(accs) if accs else 0:.3f}")
    return EXIT_OK


def cmd_signal_experiment(args) -> int:
    cfg = SignalExpConfig(
        n_traces=args.seeds,
        seed=args.seed,
        duration_s=args.duration,
        noise_sigma_us=args.noise_ms * 1000.0,
        noise_cap_us=args.noise_ms * 4000.0,
    )
    rows = run_signal_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    cols = ["signal", "mean_accuracy", "min_accuracy", "max_accuracy",
            "degenerate_fraction", "detail"]
    lines = ["# schema=1", ",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in cols))
    _atomic_write(os.path.join(args.out, "signal_accuracy.csv"),
                  "\n".join(lines) + "\n")
    if not args.no_figures:
        plotting.render_signal_figure(rows, args.out)
    best = max(rows, key=lambda r: r["mean_accuracy"])
    for r in rows:
        print(f"{r['signal']}: mean accuracy {r['mean_accuracy']:.3f} "
              f"({r['detail']})")
    if best["signal"] != "inflight_gradient":
        log.error("inflight gradient is not the most accurate signal")
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v]
    if not values:
        log.error("empty sweep value list")
        return EXIT_USAGE
    rows = []
    for raw in values:
        try:
            value = float(raw)
        except ValueError:
            log.error("bad sweep value %r", raw)
            return EXIT_USAGE
        try:
            scenario = load_scenario(args.scenario)
            if args.seed is not None:
                scenario.seed = args.seed
            apply_override(scenario, args.param, value)
        except ScenarioError as exc:
            log.error("scenario error: %s", exc)
            return EXIT_USAGE
        try:
            runlog = run(scenario)
        except InvariantViolation as exc:
            log.error("invariant violation at %s=%s: %s", args.param, raw, exc)
            return EXIT_INVARIANT
        report = metrics.compute_report(runlog, scenario)
        report["value"] = value
        report["steady_state_M"] = steady_state_burst_cap(runlog)
        report["entered_fallback"] = int(any(
            s.fallback_entries > 0 for s in runlog.snapshots))
        rows.append(report)
        print(f"{args.param}={raw}: media "
              f"{report['media_bitrate_bps'] / 1000:.0f} kbps, "
              f"M={report['steady_state_M']}")
    os.makedirs(args.out, exist_ok=True)
    cols = ["value"] + sorted(k for k in rows[0] if k != "value")
    lines = ["# schema=1", ",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(r.get(c)) for c in cols))
    _atomic_write(os.path.join(args.out, "sweep.csv"), "\n".join(lines) + "\n")
    if not args.no_figures:
        plotting.render_sweep_figure(rows, args.param, args.out)
    return EXIT_OK


def steady_state_burst_cap(runlog: RunLog, tail_us: int = 50 * US_PER_S) -> int:
    """Median burst cap over the final stretch of the run (flow 0)."""
    cutoff = runlog.duration_us - tail_us
    caps = sorted(s.burst_cap for s in runlog.snapshots
                  if s.flow == 0 and s.time >= cutoff)
    if not caps:
        return 0
    return caps[len(caps) // 2]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camelcc",
        description="Frame-level congestion control simulator and experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sig = sub.add_parser("signal-exp",
                           help="congestion-signal accuracy comparison")
    p_sig.add_argument("--out", required=True)
    p_sig.add_argument("--seeds", type=int, default=20,
                       help="number of synthetic traces")
    p_sig.add_argument("--seed", type=int, default=1)
    p_sig.add_argument("--duration", type=float, default=90.0)
    p_sig.add_argument("--noise-ms", type=float, default=2.5,
                       help="observation noise sigma in milliseconds")
    p_sig.add_argument("--no-figures", action="store_true")
    p_sig.set_defaults(func=cmd_signal_experiment)

    p_sweep = sub.add_parser("sweep", help="run a scenario over parameter values")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--param", required=True,
                         help="dotted path, e.g. link.buffer_bytes")
    p_sweep.add_argument("--values", required=True, help="comma-separated")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CAMEL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
