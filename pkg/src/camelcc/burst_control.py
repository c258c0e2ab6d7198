"""Adaptive burst length from interval-wise loss rates.

Each frame's bytes are cut into fixed 2 KB intervals by their offset
within the frame, and loss is counted per interval. The first interval's
loss rate estimates the physical (non-overflow) loss floor, because
drop-tail overflow concentrates deep into a frame's transmission. Every
5 s the burst cap M steps down 2 KB if any sufficiently sampled deeper
interval is lossy relative to that floor, otherwise up 2 KB. If loss
persists even once M sits at its minimum, the controller abandons
bursting (GCC-style fallback) until a run of clean epochs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import US_PER_S

INTERVAL_BYTES = 2048
M_STEP = 2048
M_INIT = 8192
M_MIN = 2048
M_MAX = 65536
EPOCH_US = 5 * US_PER_S
LOSS_MARGIN = 0.1         # lossy iff L_i > L_0 + margin
N_RECOVER = 6             # clean epochs before leaving fallback
MIN_INTERVAL_SAMPLES = 8  # packets an interval needs before its rate counts


class ColdEpochError(RuntimeError):
    """No samples in the interval needed for a loss-rate estimate."""


@dataclass
class IntervalLossStats:
    interval_width: int = INTERVAL_BYTES
    sent: dict[int, int] = field(default_factory=dict)
    lost: dict[int, int] = field(default_factory=dict)
    epoch_start: int = 0

    def reset(self, now: int) -> None:
        self.sent.clear()
        self.lost.clear()
        self.epoch_start = now

    def loss_rate(self, interval: int) -> float:
        sent = self.sent.get(interval, 0)
        if sent == 0:
            raise ColdEpochError(f"no samples in interval {interval}")
        return self.lost.get(interval, 0) / sent

    def deepest_sampled(self) -> int | None:
        if not self.sent:
            return None
        return max(self.sent)


def record_packet(stats: IntervalLossStats, byte_offset_in_burst: int, lost: bool) -> None:
    if byte_offset_in_burst < 0:
        raise ValueError("negative burst offset")
    idx = byte_offset_in_burst // stats.interval_width
    stats.sent[idx] = stats.sent.get(idx, 0) + 1
    if lost:
        stats.lost[idx] = stats.lost.get(idx, 0) + 1


def physical_loss_rate(stats: IntervalLossStats) -> float:
    """Loss rate of interval 0 within the current epoch."""
    return stats.loss_rate(0)


@dataclass
class BurstLengthState:
    M: int = M_INIT
    M_min: int = M_MIN
    M_max: int = M_MAX
    last_update: int = 0
    fallback_active: bool = False
    clean_epochs: int = 0
    fallback_entries: int = 0


def max_burst(state: BurstLengthState) -> int:
    return state.M_min if state.fallback_active else state.M


def _epoch_is_lossy(stats: IntervalLossStats, margin: float, min_samples: int) -> bool:
    try:
        l0 = stats.loss_rate(0)
    except ColdEpochError:
        return False  # nothing sent this epoch: treat as clean
    deeper = [i for i in stats.sent
              if i >= 1 and stats.sent[i] >= min_samples]
    return any(stats.loss_rate(i) > l0 + margin for i in deeper)


def update_M(
    state: BurstLengthState,
    stats: IntervalLossStats,
    now: int,
    epoch_us: int = EPOCH_US,
    step: int = M_STEP,
    margin: float = LOSS_MARGIN,
    n_recover: int = N_RECOVER,
    min_samples: int = MIN_INTERVAL_SAMPLES,
) -> BurstLengthState:
    """Per-epoch burst length update; no-op before the epoch elapses.

    Mutates and returns state; resets the interval counters for the next
    epoch.
    """
    if now - state.last_update < epoch_us:
        return state

    lossy = _epoch_is_lossy(stats, margin, min_samples)

    if state.fallback_active:
        if lossy:
            state.clean_epochs = 0
        else:
            state.clean_epochs += 1
            if state.clean_epochs >= n_recover:
                state.fallback_active = False
                state.M = state.M_min
                state.clean_epochs = 0
    elif lossy:
        if state.M <= state.M_min:
            state.fallback_active = True
            state.fallback_entries += 1
            state.M = state.M_min
            state.clean_epochs = 0
        else:
            state.M = max(state.M_min, state.M - step)
    else:
        state.M = min(state.M_max, state.M + step)

    state.last_update = now
    stats.reset(now)
    return state
