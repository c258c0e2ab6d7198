"""Congestion-signal accuracy comparison on synthetic queue-model traces.

Generates encoder-like inflight series (plateaus and ramps between levels
straddling the pipe capacity, plus per-frame oscillation), maps them to
RTTs through the idealized queuing model, optionally adds observation
noise, and scores three detectors against the ground-truth congestion
state (inflight above the BDP): the delay-vs-inflight gradient at its
fixed relative threshold, and delay-minus-minimum / delay-vs-time
baselines at their best per-trace grid thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import US_PER_S


@dataclass
class SignalExpConfig:
    bandwidth_bps: float = 2_000_000.0
    rtprop_us: int = 25_000
    duration_s: float = 90.0
    sample_interval_us: int = 40_000
    window_us: int = 5 * US_PER_S
    k_thresh: float = 0.5
    n_traces: int = 20
    seed: int = 1
    noise_sigma_us: float = 2500.0
    noise_cap_us: float = 10000.0
    # generator: mostly linear ramps between levels alternating below and
    # above the pipe capacity, plus small per-sample oscillation (fractions
    # of the BDP)
    level_lo_band: tuple = (0.3, 0.85)
    level_hi_band: tuple = (1.4, 2.5)
    segment_s_min: float = 12.0
    segment_s_max: float = 30.0
    ramp_fraction: float = 0.9
    osc: float = 0.02
    minrtt_grid_us: tuple = (250, 500, 1000, 2000, 4000, 6000, 10000, 15000, 25000)
    timegrad_grid_us_per_s: tuple = (250, 500, 1000, 2000, 4000, 8000, 16000, 32000)

    @property
    def bdp_bytes(self) -> int:
        return int(self.bandwidth_bps * self.rtprop_us / (8 * US_PER_S))


def generate_inflight(cfg: SignalExpConfig, rng: np.random.Generator) -> np.ndarray:
    """Seeded piecewise-linear inflight wander within bounds, alternating
    across the BDP so every trace exercises both congestion states."""
    n = int(cfg.duration_s * US_PER_S / cfg.sample_interval_us)
    levels = np.empty(n)
    i = 0
    side_high = rng.random() < 0.5
    band = cfg.level_hi_band if side_high else cfg.level_lo_band
    level = rng.uniform(*band)
    while i < n:
        seg_len = int(rng.uniform(cfg.segment_s_min, cfg.segment_s_max)
                      * US_PER_S / cfg.sample_interval_us)
        seg_len = max(1, min(seg_len, n - i))
        side_high = not side_high
        band = cfg.level_hi_band if side_high else cfg.level_lo_band
        new_level = rng.uniform(*band)
        if rng.random() < cfg.ramp_fraction:
            levels[i:i + seg_len] = np.linspace(level, new_level, seg_len)
        else:
            levels[i:i + seg_len] = new_level
        level = new_level
        i += seg_len
    osc = rng.uniform(-cfg.osc, cfg.osc, n)
    inflight = np.maximum(0.02, levels + osc) * cfg.bdp_bytes
    return inflight.astype(np.int64)


def _sliding_slope(x: np.ndarray, y: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    """OLS slope of y on x over each length-w window ending at index i,
    for i >= w-1. Returns (slopes, degenerate_mask)."""
    x = x - x.mean()
    y = y - y.mean()
    cx = np.concatenate([[0.0], np.cumsum(x)])
    cy = np.concatenate([[0.0], np.cumsum(y)])
    cxx = np.concatenate([[0.0], np.cumsum(x * x)])
    cxy = np.concatenate([[0.0], np.cumsum(x * y)])
    sx = cx[w:] - cx[:-w]
    sy = cy[w:] - cy[:-w]
    sxx = cxx[w:] - cxx[:-w]
    sxy = cxy[w:] - cxy[:-w]
    den = w * sxx - sx * sx
    num = w * sxy - sx * sy
    degenerate = den <= 1e-9 * max(1.0, float(np.abs(sxx).max())) * w
    slopes = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    return slopes, degenerate


def _rolling_min(x: np.ndarray, w: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, w)
    return view.min(axis=1)


def evaluate_trace(cfg: SignalExpConfig, inflight: np.ndarray,
                   rng: np.random.Generator) -> dict:
    """Accuracy of each detector on one trace; baselines at their best
    grid threshold for this trace."""
    bdp = cfg.bdp_bytes
    excess = np.maximum(0, inflight - bdp)
    rtt_true = cfg.rtprop_us + excess * 8 * US_PER_S / cfg.bandwidth_bps
    truth = inflight > bdp
    if cfg.noise_sigma_us > 0:
        noise = np.clip(rng.normal(0.0, cfg.noise_sigma_us, inflight.shape),
                        0.0, cfg.noise_cap_us)
    else:
        noise = 0.0
    rtt_obs = rtt_true + noise

    w = max(2, cfg.window_us // cfg.sample_interval_us)
    t_s = np.arange(len(inflight)) * (cfg.sample_interval_us / US_PER_S)
    truth_eval = truth[w - 1:]

    slope_inf, degenerate = _sliding_slope(inflight.astype(float), rtt_obs, w)
    thresh = cfg.k_thresh * 8 * US_PER_S / cfg.bandwidth_bps
    acc_inf = float(np.mean((slope_inf > thresh) == truth_eval))

    signal = rtt_obs[w - 1:] - _rolling_min(rtt_obs, w)
    acc_minrtt = max(
        float(np.mean((signal > th) == truth_eval)) for th in cfg.minrtt_grid_us)

    slope_t, _ = _sliding_slope(t_s, rtt_obs, w)
    acc_tgrad = max(
        float(np.mean((slope_t > th) == truth_eval))
        for th in cfg.timegrad_grid_us_per_s)

    return {
        "inflight_gradient": acc_inf,
        "minrtt": acc_minrtt,
        "time_gradient": acc_tgrad,
        "degenerate_fraction": float(np.mean(degenerate)),
    }


def run_signal_experiment(cfg: SignalExpConfig | None = None) -> list[dict]:
    """Rows of per-signal accuracy aggregated over seeded traces."""
    cfg = cfg or SignalExpConfig()
    per_signal: dict[str, list[float]] = {
        "inflight_gradient": [], "minrtt": [], "time_gradient": []}
    degenerate: list[float] = []
    for k in range(cfg.n_traces):
        rng = np.random.default_rng([cfg.seed, k])
        inflight = generate_inflight(cfg, rng)
        result = evaluate_trace(cfg, inflight, rng)
        for name in per_signal:
            per_signal[name].append(result[name])
        degenerate.append(result["degenerate_fraction"])

    rows = []
    details = {
        "inflight_gradient": f"k_thresh={cfg.k_thresh}",
        "minrtt": "best per-trace grid threshold",
        "time_gradient": "best per-trace grid threshold",
    }
    for name, accs in per_signal.items():
        rows.append({
            "signal": name,
            "mean_accuracy": sum(accs) / len(accs),
            "min_accuracy": min(accs),
            "max_accuracy": max(accs),
            "degenerate_fraction": (sum(degenerate) / len(degenerate)
                                    if name == "inflight_gradient" else 0.0),
            "detail": details[name],
        })
    return rows
