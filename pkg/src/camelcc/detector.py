"""Congestion detection from the delay-vs-inflight gradient.

The primary signal is the least-squares slope of frame delay against bytes
in flight over a sliding window. Under a drop-tail bottleneck the slope is
0 while the pipe is underfilled and 1/rate once it saturates, so the
threshold is expressed as a fraction of that fully-congested slope. Two
simpler signals (delay minus window minimum, delay-vs-time slope) are kept
for accuracy comparisons.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from .core import US_PER_S

W_SIG_US = 5 * US_PER_S
K_THRESH = 0.5        # threshold as a fraction of the congested slope 1/BW
GAMMA_DECAY = 0.95
GAMMA_FLOOR = 0.25


@dataclass
class GammaState:
    gamma: float = 1.0
    last_update_time: int = 0
    floor: float = GAMMA_FLOOR


@dataclass
class CongestionVerdict:
    congested: bool
    gradient: float        # us per byte
    threshold_used: float  # us per byte
    flag: str | None = None  # "cold" | "degenerate" | None


class SignalWindow:
    """Time-bounded (inflight, delay) samples, ordered by time."""

    def __init__(self, span_us: int = W_SIG_US):
        self.span_us = span_us
        self.samples: deque[tuple[int, int, int]] = deque()  # (time, inflight, delay)

    def add(self, time: int, inflight: int, delay: int) -> None:
        if self.samples and time < self.samples[-1][0]:
            raise ValueError("samples must arrive in time order")
        self.samples.append((time, inflight, delay))
        while self.samples and time - self.samples[0][0] > self.span_us:
            self.samples.popleft()

    def __len__(self) -> int:
        return len(self.samples)


def _ols_slope(xs: list[float], ys: list[float]) -> tuple[float, bool]:
    """Least-squares slope of ys on xs; (0.0, True) when xs is degenerate."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        return 0.0, True
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx, False


def inflight_gradient(window: SignalWindow) -> float:
    """Slope of delay vs inflight over the window, in us per byte."""
    if len(window) < 2:
        return 0.0
    xs = [float(s[1]) for s in window.samples]
    ys = [float(s[2]) for s in window.samples]
    slope, _ = _ols_slope(xs, ys)
    return slope


def minrtt_signal(window: SignalWindow) -> int:
    """Newest delay minus the window minimum, in microseconds."""
    if len(window) == 0:
        return 0
    newest = window.samples[-1][2]
    return newest - min(s[2] for s in window.samples)


def time_gradient(window: SignalWindow) -> float:
    """Slope of delay vs time over the window, in us per second."""
    if len(window) < 2:
        return 0.0
    xs = [s[0] / US_PER_S for s in window.samples]
    ys = [float(s[2]) for s in window.samples]
    slope, _ = _ols_slope(xs, ys)
    return slope


def detect(
    window: SignalWindow,
    avg_bandwidth: float,
    k_thresh: float = K_THRESH,
) -> CongestionVerdict:
    """Congested iff the inflight gradient exceeds k_thresh times the
    fully-congested slope 8/avg_bandwidth (strict inequality)."""
    threshold = k_thresh * 8 * US_PER_S / avg_bandwidth  # us per byte
    if len(window) < 2:
        return CongestionVerdict(False, 0.0, threshold, flag="cold")
    xs = [float(s[1]) for s in window.samples]
    ys = [float(s[2]) for s in window.samples]
    slope, degenerate = _ols_slope(xs, ys)
    if degenerate:
        return CongestionVerdict(False, 0.0, threshold, flag="degenerate")
    return CongestionVerdict(slope > threshold, slope, threshold)


def update_gamma(state: GammaState, verdict: CongestionVerdict, now: int = 0) -> GammaState:
    """Multiplicative decay on congestion, reset to 1 otherwise."""
    if verdict.congested:
        gamma = max(state.floor, state.gamma * GAMMA_DECAY)
    else:
        gamma = 1.0
    return replace(state, gamma=gamma, last_update_time=now)


def target_bitrate(gamma: float, avg_bandwidth: float) -> float:
    """Congestion-adjusted rate reported to the application layer."""
    return gamma * avg_bandwidth
