"""Synthetic real-time encoder: frame sizes tracking a target bitrate.

Models the traffic pattern of a live encoder, a frame every 1/fps with
sizes that undershoot the target by a configurable encoded-to-target
ratio, an I/P size skew within each GOP, and multiplicative lognormal
size jitter. Deterministic for a given seed.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .core import Frame, US_PER_S

MIN_FRAME_BYTES = 100


@dataclass
class EncoderConfig:
    fps: int = 30
    gop_length: int = 1
    i_to_p_ratio: float = 1.0
    etr: float = 1.0
    size_jitter_cv: float = 0.0
    seed: str = "0"
    # optional (time_us, etr) steps overriding the flat etr, held piecewise
    etr_schedule: list[tuple[int, float]] = field(default_factory=list)

    def etr_at(self, now: int) -> float:
        value = self.etr
        for t, e in self.etr_schedule:
            if now >= t:
                value = e
            else:
                break
        return value


class EncoderState:
    def __init__(self, config: EncoderConfig):
        self.config = config
        self.frame_counter = 0
        self.rng = random.Random(f"encoder:{config.seed}")
        sigma2 = math.log(1.0 + config.size_jitter_cv**2)
        self._jitter_sigma = math.sqrt(sigma2)
        self._jitter_mu = -sigma2 / 2  # unit-mean lognormal

    def frame_time(self, index: int) -> int:
        """Emission time of frame `index` relative to the flow start."""
        return index * US_PER_S // self.config.fps


def next_frame(state: EncoderState, target_bitrate: float, now: int) -> Frame:
    cfg = state.config
    if target_bitrate <= 0:
        raise ValueError("target bitrate must be positive")
    mean = cfg.etr_at(now) * target_bitrate / (8 * cfg.fps)
    gop = max(1, cfg.gop_length)
    # solve ratio*s + (gop-1)*s = gop*mean so the GOP mean is preserved
    p_size = gop * mean / (cfg.i_to_p_ratio + gop - 1)
    is_i = state.frame_counter % gop == 0
    base = cfg.i_to_p_ratio * p_size if is_i else p_size
    if cfg.size_jitter_cv > 0:
        base *= state.rng.lognormvariate(state._jitter_mu, state._jitter_sigma)
    size = max(MIN_FRAME_BYTES, int(round(base)))
    frame = Frame(
        frame_id=state.frame_counter,
        kind="I" if is_i else "P",
        size=size,
        encode_time=now,
    )
    state.frame_counter += 1
    return frame


def long_run_bitrate(frame_sizes: list[int], window_us: int) -> float:
    """Total encoded bits over the window duration, in bits per second."""
    if window_us <= 0 or not frame_sizes:
        return 0.0
    return sum(frame_sizes) * 8 * US_PER_S / window_us
