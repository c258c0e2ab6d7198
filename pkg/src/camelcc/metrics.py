"""Evaluation metrics computed from simulation run logs."""
from __future__ import annotations

import statistics

from .core import US_PER_S
from .netsim import RunLog, ScenarioConfig, rate_at

STALL_THRESHOLD_US = 200_000
WARMUP_US = 5 * US_PER_S
FAIRNESS_WINDOW_US = 20 * US_PER_S


def stalling_ratio(delivery_times: list[int], span_us: int,
                   threshold_us: int = STALL_THRESHOLD_US) -> float:
    """Fraction of the run spent stalled: each inter-delivery gap
    contributes its excess over the threshold."""
    if len(delivery_times) < 2 or span_us <= 0:
        return 0.0
    stall = 0
    for a, b in zip(delivery_times, delivery_times[1:]):
        stall += max(0, b - a - threshold_us)
    return min(1.0, stall / span_us)


def bw_estimation_accuracy(
    samples: list[tuple[int, float]],
    schedule: list[tuple[int, float]],
    t_start: int,
    t_end: int,
) -> float:
    """Mean of 1 - |estimate - true| / true over (time, estimate) samples
    within [t_start, t_end), floored at 0 per sample."""
    vals = []
    for t, est in samples:
        if not (t_start <= t < t_end):
            continue
        true = rate_at(schedule, t)
        if true <= 0:
            continue
        vals.append(max(0.0, 1.0 - abs(est - true) / true))
    if not vals:
        return 0.0
    return sum(vals) / len(vals)


def fairness_index(throughputs: list[float]) -> float:
    """Jain's index: (sum x)^2 / (n * sum x^2)."""
    if len(throughputs) < 2:
        raise ValueError("need at least two flows")
    total = sum(throughputs)
    sq = sum(x * x for x in throughputs)
    if sq == 0:
        raise ValueError("all-zero throughputs")
    return total * total / (len(throughputs) * sq)


def signal_accuracy(predicted: list[bool], truth: list[bool]) -> float:
    if not predicted or len(predicted) != len(truth):
        raise ValueError("series must be non-empty and equal length")
    return sum(p == t for p, t in zip(predicted, truth)) / len(predicted)


def media_bitrate(log: RunLog, flow: int, t_start: int, t_end: int) -> float:
    """Delivered media payload over the window, in bits per second."""
    if t_end <= t_start:
        return 0.0
    delivered = sum(
        p.size for p in log.packets
        if p.flow == flow and not p.lost and p.recv_time is not None
        and t_start <= p.recv_time < t_end)
    return delivered * 8 * US_PER_S / (t_end - t_start)


def frame_delay_quantiles(log: RunLog, flow: int) -> tuple[float, float]:
    """(p50, p95) of encode-to-delivery frame delay in microseconds."""
    delays = sorted(d.delivery_time - d.encode_time
                    for d in log.frame_deliveries if d.flow == flow)
    if not delays:
        return (0.0, 0.0)
    if len(delays) == 1:
        return (float(delays[0]), float(delays[0]))
    qs = statistics.quantiles(delays, n=100, method="inclusive")
    return (qs[49], qs[94])


def compute_report(log: RunLog, scenario: ScenarioConfig) -> dict:
    """Flat key-value metrics report for a finished run."""
    report: dict[str, float | int | str] = {
        "duration_s": scenario.duration_us / US_PER_S,
        "seed": scenario.seed,
    }
    media_flows = [i for i, f in enumerate(scenario.flows)
                   if f.controller != "cross"]
    schedule = scenario.link.schedule
    end = scenario.duration_us
    total_media = 0.0
    final_throughputs = []
    for i in media_flows:
        spec = scenario.flows[i]
        suffix = f"_flow{i}" if len(media_flows) > 1 else ""
        span = end - spec.start_us
        mb = media_bitrate(log, i, spec.start_us, end)
        total_media += mb
        p50, p95 = frame_delay_quantiles(log, i)
        deliveries = [d.delivery_time for d in log.frame_deliveries if d.flow == i]
        est_samples = [(s.time, s.avg_bw if s.avg_bw is not None else s.reported_bw)
                       for s in log.snapshots if s.flow == i]
        acc = bw_estimation_accuracy(
            est_samples, schedule, spec.start_us + WARMUP_US, end)
        report[f"media_bitrate_bps{suffix}"] = mb
        report[f"frame_delay_p50_us{suffix}"] = p50
        report[f"frame_delay_p95_us{suffix}"] = p95
        report[f"stalling_ratio{suffix}"] = stalling_ratio(deliveries, span)
        report[f"bw_estimation_accuracy{suffix}"] = acc
        final_throughputs.append(
            media_bitrate(log, i, max(spec.start_us, end - FAIRNESS_WINDOW_US), end))
    report["media_bitrate_bps"] = total_media
    if len(media_flows) > 1:
        try:
            report["fairness_index"] = fairness_index(final_throughputs)
        except ValueError:
            report["fairness_index"] = 0.0
    for summary in log.flow_summaries:
        i = summary["flow"]
        if scenario.flows[i].controller == "cross":
            continue
        suffix = f"_flow{i}" if len(media_flows) > 1 else ""
        report[f"app_drops{suffix}"] = summary.get("app_drops", 0)
        report[f"fallback_entries{suffix}"] = summary.get("fallback_entries", 0)
    report["invariant_checks"] = log.invariant_checks
    return report
