"""Deterministic discrete-event simulation of a bottleneck link.

Single drop-tail queue with a piecewise-constant rate schedule, symmetric
propagation delay, optional uniform random loss and truncated-gaussian
delivery jitter. The receiver emits one feedback report per frame once
every packet of the frame is resolved (delivered or dropped); reports
travel back over a clean path with half the propagation delay. All times
are integer microseconds and all randomness comes from seeded generators,
so runs are bit-reproducible.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .controller import MODE_BURST, MODE_FALLBACK, CamelParams, CamelSender
from .core import (MTU, US_PER_S, FeedbackEntry, FeedbackReport,
                   InvariantViolation, Packet, SimClock, packetize)
from .encoder import EncoderConfig, EncoderState, next_frame
from .estimator import FrameSample, frame_bandwidth, frame_delay


# --------------------------------------------------------------------- link

@dataclass
class LinkSpec:
    schedule: list[tuple[int, float]]  # (start_us, rate_bps), sorted
    rtprop_us: int = 25_000
    buffer_bytes: int = 30_000
    loss_p: float = 0.0
    jitter_sigma_us: int = 0
    jitter_cap_us: int = 0

    def rate_at(self, t: int) -> float:
        rate = self.schedule[0][1]
        for start, r in self.schedule:
            if t >= start:
                rate = r
            else:
                break
        return rate

    def min_rate(self) -> float:
        return min(r for _, r in self.schedule)


def rate_at(schedule: list[tuple[int, float]], t: int) -> float:
    rate = schedule[0][1]
    for start, r in schedule:
        if t >= start:
            rate = r
        else:
            break
    return rate


def load_rate_trace(path: str) -> list[tuple[int, float]]:
    """Two-column text file: time_seconds rate_kbps, piecewise-constant."""
    schedule: list[tuple[int, float]] = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'time_s rate_kbps'")
            t_s, rate_kbps = float(parts[0]), float(parts[1])
            schedule.append((int(t_s * US_PER_S), rate_kbps * 1000.0))
    if not schedule:
        raise ValueError(f"{path}: empty trace")
    schedule.sort(key=lambda e: e[0])
    return schedule


class DropTailLink:
    """Byte-capacity drop-tail queue in front of a serializing transmitter.

    Occupancy counts only waiting packets, not the one in service, so the
    head of a back-to-back burst is never the one dropped. Service rate is
    sampled at service start.
    """

    def __init__(self, spec: LinkSpec, seed: str):
        self.spec = spec
        self.rng = random.Random(f"link:{seed}")
        self.jitter_rng = random.Random(f"jitter:{seed}")
        self.busy_until = 0
        self.queued_bytes = 0
        self._pending: list[tuple[int, int]] = []  # (service_start, size)
        self._last_arrival = 0
        self.enqueued_bytes = 0
        self.delivered_bytes = 0
        self.dropped_bytes = 0

    def _drain_pending(self, now: int) -> None:
        while self._pending and self._pending[0][0] <= now:
            self.queued_bytes -= self._pending.pop(0)[1]

    def queue_bytes(self, now: int) -> int:
        self._drain_pending(now)
        return self.queued_bytes

    def enqueue(self, size: int, now: int) -> tuple[str, int, int]:
        """Returns (outcome, depart_us, arrive_us); times are 0 on drops.

        outcome is "delivered", "random", or "overflow".
        """
        self.enqueued_bytes += size
        if self.spec.loss_p > 0 and self.rng.random() < self.spec.loss_p:
            self.dropped_bytes += size
            return ("random", 0, 0)
        self._drain_pending(now)
        if now >= self.busy_until:
            service_start = now  # idle transmitter, bypass the buffer
        else:
            if self.queued_bytes + size > self.spec.buffer_bytes:
                self.dropped_bytes += size
                return ("overflow", 0, 0)
            service_start = self.busy_until
            self.queued_bytes += size
            self._pending.append((service_start, size))
        rate = self.spec.rate_at(service_start)
        service = (size * 8 * US_PER_S + int(rate) // 2) // int(rate)
        depart = service_start + max(1, service)
        self.busy_until = depart
        arrive = depart + self.spec.rtprop_us // 2 + self._jitter()
        arrive = max(arrive, self._last_arrival)  # in-order delivery
        self._last_arrival = arrive
        self.delivered_bytes += size
        return ("delivered", depart, arrive)

    def _jitter(self) -> int:
        if self.spec.jitter_sigma_us <= 0:
            return 0
        draw = self.jitter_rng.gauss(0.0, self.spec.jitter_sigma_us)
        return int(min(self.spec.jitter_cap_us, max(0.0, draw)))

    def check_conservation(self) -> None:
        if self.delivered_bytes + self.dropped_bytes != self.enqueued_bytes:
            raise InvariantViolation(
                f"link bytes: {self.delivered_bytes}+{self.dropped_bytes}"
                f" != {self.enqueued_bytes}")


# ------------------------------------------------------------ queuing model

def analytic_rtt(inflight: int, bandwidth: float, rtprop_us: int, bdp_bytes: int) -> float:
    """Idealized queuing delay model: flat at rtprop until the pipe fills,
    then linear in the excess bytes in flight."""
    if inflight > bdp_bytes:
        return rtprop_us + (inflight - bdp_bytes) * 8 * US_PER_S / bandwidth
    return float(rtprop_us)


def synth_trace(
    inflight_series: list[int],
    bandwidth: float,
    rtprop_us: int,
    bdp_bytes: int,
) -> list[tuple[int, float, bool]]:
    """(inflight, rtt, ground_truth_congested) per element."""
    if not inflight_series:
        raise ValueError("empty inflight series")
    out = []
    for inflight in inflight_series:
        rtt = analytic_rtt(inflight, bandwidth, rtprop_us, bdp_bytes)
        out.append((inflight, rtt, rtt > rtprop_us))
    return out


# ------------------------------------------------------------ scenario simulation

@dataclass
class FlowSpec:
    controller: str = "camel"  # camel | fallback-only | cross
    start_us: int = 0
    encoder: EncoderConfig | None = None
    rate_bps: float = 0.0  # cross traffic only


@dataclass
class ScenarioConfig:
    duration_us: int
    seed: int
    link: LinkSpec
    flows: list[FlowSpec]
    params: CamelParams = field(default_factory=CamelParams)
    snapshot_interval_us: int = 100_000
    name: str = "scenario"


@dataclass
class PacketRecord:
    flow: int
    frame_id: int
    seq: int
    size: int
    send_time: int
    recv_time: int | None
    lost: bool
    drop_kind: str | None


@dataclass
class FrameDeliveryRecord:
    flow: int
    frame_id: int
    encode_time: int
    delivery_time: int
    size: int


@dataclass
class SnapshotRecord:
    time: int
    flow: int
    mode: str
    cwnd: int
    inflight: int
    gamma: float
    burst_cap: int
    avg_bw: float | None
    min_delay: int | None
    reported_bw: float
    queue_bytes: int
    pending_frames: int
    app_drops: int
    fallback_entries: int


@dataclass
class RunLog:
    duration_us: int
    seed: int
    snapshots: list[SnapshotRecord] = field(default_factory=list)
    packets: list[PacketRecord] = field(default_factory=list)
    frame_deliveries: list[FrameDeliveryRecord] = field(default_factory=list)
    feedback_times: list[tuple[int, int, int]] = field(default_factory=list)
    flow_summaries: list[dict] = field(default_factory=list)
    invariant_checks: int = 0


class _ReceiverFrame:
    __slots__ = ("total", "entries", "latest", "received_bytes", "frame_bytes")

    def __init__(self, total: int):
        self.total = total
        self.entries: dict[int, tuple[int | None, bool]] = {}
        self.latest = 0
        self.received_bytes = 0
        self.frame_bytes = 0


class _FlowRuntime:
    def __init__(self, idx: int, spec: FlowSpec, params: CamelParams, seed: int):
        self.idx = idx
        self.spec = spec
        self.sender: CamelSender | None = None
        self.encoder: EncoderState | None = None
        if spec.controller in ("camel", "fallback-only"):
            mode = MODE_BURST if spec.controller == "camel" else MODE_FALLBACK
            self.sender = CamelSender(idx, params, start_mode=mode)
            if spec.controller == "fallback-only":
                # a pure paced flow never re-enters burst mode
                self.sender.burst_state.fallback_active = True
                self.sender.burst_state.M = self.sender.burst_state.M_min
            enc_cfg = spec.encoder or EncoderConfig()
            enc_cfg.seed = f"{seed}:flow{idx}"
            self.encoder = EncoderState(enc_cfg)
        self.frame_index = 0
        self.rx_frames: dict[int, _ReceiverFrame] = {}
        self.encode_times: dict[int, int] = {}
        self.frame_sizes: dict[int, int] = {}
        self.delivered_bytes = 0
        self.enqueued_bytes = 0
        self.dropped_bytes = 0


def run(scenario: ScenarioConfig) -> RunLog:
    """Execute the event loop to the scenario duration."""
    if scenario.duration_us <= 0:
        return RunLog(duration_us=scenario.duration_us, seed=scenario.seed)
    link = DropTailLink(scenario.link, seed=str(scenario.seed))
    clock = SimClock(0)
    log = RunLog(duration_us=scenario.duration_us, seed=scenario.seed)
    flows = [_FlowRuntime(i, spec, scenario.params, scenario.seed)
             for i, spec in enumerate(scenario.flows)]

    events: list[tuple[int, int, str, object]] = []
    counter = 0

    def push(t: int, kind: str, payload: object) -> None:
        nonlocal counter
        counter += 1
        heapq.heappush(events, (t, counter, kind, payload))

    for fl in flows:
        if fl.spec.controller == "cross":
            push(fl.spec.start_us, "cross", (fl.idx, 0))
        else:
            push(fl.spec.start_us, "frame", fl.idx)
    push(0, "snap", None)

    def emit_packets(fl: _FlowRuntime, packets: list[Packet], now: int) -> None:
        for pkt in packets:
            fl.enqueued_bytes += pkt.size
            outcome, _, arrive = link.enqueue(pkt.size, now)
            if outcome == "delivered":
                pkt.recv_time = arrive
                push(arrive, "deliver", (fl.idx, pkt))
            else:
                pkt.lost = True
                fl.dropped_bytes += pkt.size
                log.packets.append(PacketRecord(
                    fl.idx, pkt.frame_id, pkt.seq_in_frame, pkt.size,
                    pkt.send_time, None, True, outcome))
                _resolve(fl, pkt, now, lost=True)

    def _resolve(fl: _FlowRuntime, pkt: Packet, t: int, lost: bool) -> None:
        rec = fl.rx_frames.get(pkt.frame_id)
        if rec is None:
            rec = _ReceiverFrame(pkt.frame_packet_count)
            fl.rx_frames[pkt.frame_id] = rec
        rec.entries[pkt.seq_in_frame] = (None if lost else pkt.recv_time, lost)
        rec.latest = max(rec.latest, t)
        rec.frame_bytes += pkt.size
        if not lost:
            rec.received_bytes += pkt.size
        if len(rec.entries) == rec.total:
            del fl.rx_frames[pkt.frame_id]
            if rec.received_bytes == rec.frame_bytes and fl.idx in camel_idx:
                log.frame_deliveries.append(FrameDeliveryRecord(
                    fl.idx, pkt.frame_id, fl.encode_times.get(pkt.frame_id, 0),
                    rec.latest, rec.frame_bytes))
            if any(not e[1] for e in rec.entries.values()):
                entries = [FeedbackEntry(seq, rt, lost_)
                           for seq, (rt, lost_) in sorted(rec.entries.items())]
                report = FeedbackReport(
                    flow_id=fl.idx, frame_id=pkt.frame_id, entries=entries,
                    sent_time=rec.latest,
                    report_arrival_time=rec.latest + scenario.link.rtprop_us // 2)
                push(report.report_arrival_time, "report", (fl.idx, report))

    camel_idx = {fl.idx for fl in flows if fl.sender is not None}
    end = scenario.duration_us

    while events:
        t, seq, kind, payload = heapq.heappop(events)
        if t > end:
            heapq.heappush(events, (t, seq, kind, payload))
            break
        clock.advance_to(t)

        if kind == "frame":
            fl = flows[payload]
            sender = fl.sender
            target = sender.app_target_bitrate()
            frame = next_frame(fl.encoder, target, t)
            fl.encode_times[frame.frame_id] = t
            fl.frame_sizes[frame.frame_id] = frame.size
            decision = sender.on_frame(frame, t)
            emit_packets(fl, decision.packets, t)
            if decision.next_wakeup is not None:
                push(decision.next_wakeup, "wake", fl.idx)
            fl.frame_index += 1
            nxt = fl.spec.start_us + fl.encoder.frame_time(fl.frame_index)
            if nxt <= end:
                push(nxt, "frame", fl.idx)

        elif kind == "wake":
            fl = flows[payload]
            decision = fl.sender.on_timer(t)
            emit_packets(fl, decision.packets, t)
            if decision.next_wakeup is not None:
                push(decision.next_wakeup, "wake", fl.idx)

        elif kind == "deliver":
            fl_idx, pkt = payload
            fl = flows[fl_idx]
            fl.delivered_bytes += pkt.size
            log.packets.append(PacketRecord(
                fl.idx, pkt.frame_id, pkt.seq_in_frame, pkt.size,
                pkt.send_time, pkt.recv_time, False, None))
            _resolve(fl, pkt, t, lost=False)

        elif kind == "report":
            fl_idx, report = payload
            fl = flows[fl_idx]
            log.feedback_times.append((t, fl_idx, report.frame_id))
            decision = fl.sender.on_feedback(report, t)
            emit_packets(fl, decision.packets, t)
            if decision.next_wakeup is not None:
                push(decision.next_wakeup, "wake", fl.idx)

        elif kind == "cross":
            fl_idx, k = payload
            fl = flows[fl_idx]
            pkt = Packet(flow_id=fl.idx, frame_id=k, seq_in_frame=1, size=MTU,
                         send_time=t, frame_packet_count=1)
            fl.enqueued_bytes += MTU
            outcome, _, arrive = link.enqueue(MTU, t)
            if outcome == "delivered":
                pkt.recv_time = arrive
                push(arrive, "deliver_cross", (fl.idx, pkt))
            else:
                fl.dropped_bytes += MTU
            period = MTU * 8 * US_PER_S / fl.spec.rate_bps
            nxt = fl.spec.start_us + int(round((k + 1) * period))
            if nxt <= end:
                push(nxt, "cross", (fl.idx, k + 1))

        elif kind == "deliver_cross":
            fl_idx, pkt = payload
            flows[fl_idx].delivered_bytes += pkt.size

        elif kind == "snap":
            for fl in flows:
                if fl.sender is None:
                    continue
                if t < fl.spec.start_us:
                    continue
                snap = fl.sender.snapshot()
                log.snapshots.append(SnapshotRecord(
                    time=t, flow=fl.idx, mode=snap["mode"], cwnd=snap["cwnd"],
                    inflight=snap["inflight"], gamma=snap["gamma"],
                    burst_cap=snap["burst_cap"], avg_bw=snap["avg_bw"],
                    min_delay=snap["min_delay"], reported_bw=snap["reported_bw"],
                    queue_bytes=link.queue_bytes(t),
                    pending_frames=snap["pending_frames"],
                    app_drops=snap["app_drops"],
                    fallback_entries=snap["fallback_entries"]))
            nxt = t + scenario.snapshot_interval_us
            if nxt <= end:
                push(nxt, "snap", None)

    link.check_conservation()
    # packets still in transit at the horizon are neither delivered nor dropped
    in_transit: dict[int, int] = {}
    for t, _, kind, payload in events:
        if kind in ("deliver", "deliver_cross"):
            fl_idx, pkt = payload
            in_transit[fl_idx] = in_transit.get(fl_idx, 0) + pkt.size
    for fl in flows:
        accounted = (fl.delivered_bytes + fl.dropped_bytes
                     + in_transit.get(fl.idx, 0))
        log.invariant_checks += 1
        if accounted != fl.enqueued_bytes:
            raise InvariantViolation(
                f"flow {fl.idx} byte conservation: {accounted} != "
                f"{fl.enqueued_bytes}")
        summary = {
            "flow": fl.idx,
            "controller": fl.spec.controller,
            "enqueued_bytes": fl.enqueued_bytes,
            "delivered_bytes": fl.delivered_bytes,
            "dropped_bytes": fl.dropped_bytes,
        }
        if fl.sender is not None:
            summary.update({
                "app_drops": fl.sender.app_drops,
                "unknown_reports": fl.sender.unknown_reports,
                "declared_lost_packets": fl.sender.declared_lost_packets,
                "invariant_checks": fl.sender.invariant_checks,
                "fallback_entries": fl.sender.burst_state.fallback_entries,
            })
            log.invariant_checks += fl.sender.invariant_checks
        log.flow_summaries.append(summary)
    return log


# ----------------------------------------------------------- probe harness

def probe_frames(
    link_spec: LinkSpec,
    schedule: list[tuple[int, int]],
    mtu: int = MTU,
    seed: str = "probe",
) -> list[FrameSample]:
    """Send each (send_time_us, frame_bytes) as one back-to-back burst over
    a fresh link and return the estimator's per-frame samples. Used to
    check packet-train fidelity and idle-gap immunity without a feedback
    loop (the schedule is fixed, not rate-adapted)."""
    link = DropTailLink(link_spec, seed=seed)
    samples: list[FrameSample] = []
    for frame_id, (send_time, size) in enumerate(schedule):
        sizes = packetize(size, mtu)
        entries: list[FeedbackEntry] = []
        latest = send_time
        for seq, psize in enumerate(sizes, start=1):
            outcome, _, arrive = link.enqueue(psize, send_time)
            if outcome == "delivered":
                entries.append(FeedbackEntry(seq, arrive, False))
                latest = max(latest, arrive)
            else:
                entries.append(FeedbackEntry(seq, None, True))
        report = FeedbackReport(
            flow_id=0, frame_id=frame_id, entries=entries, sent_time=latest,
            report_arrival_time=latest + link_spec.rtprop_us // 2)
        bw = frame_bandwidth(report, sizes)
        delay = frame_delay(report, [send_time] * len(sizes))
        samples.append(FrameSample(
            frame_id=frame_id, bandwidth=bw, delay=delay or 0,
            inflight_at_send=0, sample_time=report.report_arrival_time))
    return samples
