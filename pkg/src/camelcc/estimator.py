"""Per-frame bandwidth and delay estimation from feedback reports.

Each frame's packets are sent back to back, so the receiver-side arrival
spacing of the train reveals the bottleneck rate regardless of how much
idle time separates frames. Bandwidth samples are averaged over a sliding
window (frame-weighted mean); delay samples keep a sliding minimum that
approximates the round-trip propagation time.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .core import FeedbackReport, US_PER_S

W_BW_US = 5 * US_PER_S       # bandwidth averaging window
W_RTPROP_US = 10 * US_PER_S  # delay minimum tracking window


class ColdStartError(RuntimeError):
    """Raised when an estimate is requested before any sample exists."""


class ReorderedFeedbackError(ValueError):
    """Strict mode only: receive times not monotone in sequence order."""


@dataclass
class FrameSample:
    frame_id: int
    bandwidth: float | None  # bits/s, None if the frame had < 2 usable arrivals
    delay: int               # microseconds, first received packet's RTT
    inflight_at_send: int    # bytes in flight when the frame started sending
    sample_time: int


def frame_bandwidth(
    report: FeedbackReport,
    packet_sizes: list[int],
    strict: bool = False,
) -> float | None:
    """Arrival rate of the frame's packet train, in bits per second.

    Uses the first and last received packets; the numerator counts only the
    received packets after the first, so the span covers exactly their
    serialization. Returns None with fewer than 2 received packets or a
    zero arrival span.
    """
    received = [
        (e.recv_time, packet_sizes[e.seq_in_frame - 1])
        for e in report.entries
        if not e.lost and e.recv_time is not None
    ]
    if len(received) < 2:
        return None
    times = [t for t, _ in received]
    if strict and any(b < a for a, b in zip(times, times[1:])):
        raise ReorderedFeedbackError(f"reordered feedback in frame {report.frame_id}")
    # lenient mode: clamp to the min/max arrival regardless of seq order
    first = min(received, key=lambda r: r[0])
    span = max(times) - min(times)
    if span <= 0:
        return None
    payload = sum(s for _, s in received) - first[1]
    return payload * 8 * US_PER_S / span


def frame_delay(report: FeedbackReport, send_times: list[int]) -> int | None:
    """RTT of the lowest-seq received packet of the frame, in microseconds.

    The receive timestamp gives the forward delay; the report's own transit
    (arrival - sent) supplies the return-path delay. None if every packet
    was lost.
    """
    for e in report.entries:
        if not e.lost and e.recv_time is not None:
            forward = e.recv_time - send_times[e.seq_in_frame - 1]
            backward = report.report_arrival_time - report.sent_time
            return forward + backward
    return None


class EstimatorWindows:
    """Sliding windows over frame samples: avg bandwidth and min delay."""

    def __init__(self, bw_window_us: int = W_BW_US, delay_window_us: int = W_RTPROP_US):
        self.bw_window_us = bw_window_us
        self.delay_window_us = delay_window_us
        self._bw: deque[tuple[int, float]] = deque()
        self._delay: deque[tuple[int, int]] = deque()

    def add(self, sample: FrameSample) -> None:
        t = sample.sample_time
        if sample.bandwidth is not None:
            self._bw.append((t, sample.bandwidth))
            while self._bw and t - self._bw[0][0] > self.bw_window_us:
                self._bw.popleft()
        if sample.delay > 0:
            self._delay.append((t, sample.delay))
            while self._delay and t - self._delay[0][0] > self.delay_window_us:
                self._delay.popleft()

    @property
    def warm(self) -> bool:
        return bool(self._bw) and bool(self._delay)

    def avg_bandwidth(self) -> float:
        if not self._bw:
            raise ColdStartError("cold start")
        return sum(b for _, b in self._bw) / len(self._bw)

    def min_delay(self) -> int:
        if not self._delay:
            raise ColdStartError("cold start")
        return min(d for _, d in self._delay)


def bdp_estimate(windows: EstimatorWindows) -> int:
    """Bandwidth-delay product in bytes: avg bandwidth times min delay.

    Raises ColdStartError on empty windows (caller falls back to the
    initial cwnd). A degenerate zero delay yields 0 bytes.
    """
    avg_bw = windows.avg_bandwidth()  # bits/s
    min_d = windows.min_delay()       # us
    if min_d <= 0:
        return 0
    return int(avg_bw * min_d / (8 * US_PER_S))
