"""Shared domain types: packets, frames, feedback reports, simulated clock.

Conventions used throughout the package: times are integer microseconds,
sizes are integer bytes, rates cross API boundaries in bits per second.
"""
from __future__ import annotations

from dataclasses import dataclass, field

MTU = 1200  # default payload bytes per packet

US_PER_S = 1_000_000


class InvariantViolation(RuntimeError):
    """A runtime consistency check failed (window/byte conservation etc.)."""


@dataclass
class Packet:
    flow_id: int
    frame_id: int
    seq_in_frame: int  # 1-based, contiguous within a frame
    size: int
    send_time: int
    recv_time: int | None = None
    lost: bool = False
    # plumbing for the simulator / burst accounting
    frame_packet_count: int = 0
    offset_in_frame: int = 0


@dataclass
class Frame:
    frame_id: int
    kind: str  # "I" or "P"
    size: int
    encode_time: int
    packets: list[Packet] = field(default_factory=list)


@dataclass
class FeedbackEntry:
    seq_in_frame: int
    recv_time: int | None  # None iff lost
    lost: bool


@dataclass
class FeedbackReport:
    """Per-frame receiver report: one entry per packet, seq order preserved.

    sent_time is the report's emission timestamp at the receiver; the sender
    uses report_arrival_time - sent_time as the return-path delay when
    reconstructing the first-packet RTT.
    """

    flow_id: int
    frame_id: int
    entries: list[FeedbackEntry]
    sent_time: int
    report_arrival_time: int


class SimClock:
    """Monotone microsecond clock advanced only by the event loop."""

    def __init__(self, start: int = 0):
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise InvariantViolation(f"clock moved backwards: {t} < {self._now}")
        self._now = t


def packetize(frame_size: int, mtu: int = MTU) -> list[int]:
    """Split a frame into packet sizes: all of mtu except a smaller tail.

    Raises ValueError("empty frame") for frame_size < 1.
    """
    if frame_size < 1:
        raise ValueError("empty frame")
    if mtu < 1:
        raise ValueError("mtu must be >= 1")
    full, rem = divmod(frame_size, mtu)
    sizes = [mtu] * full
    if rem:
        sizes.append(rem)
    return sizes
