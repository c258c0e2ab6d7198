"""Frame-level congestion-controlled sender.

Combines the estimator, detector, and burst length controller into cwnd
management and burst scheduling. Frames are sent as back-to-back bursts of
at most the current burst cap; oversized frames are split into chunks
spread evenly before the next frame is due. cwnd = gamma * BDP estimate,
enforced at burst commit (a committed frame transmits atomically, so
inflight may overshoot cwnd by at most one frame). When the burst length
controller gives up on bursting, the sender switches to a paced
delay-gradient AIMD mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import burst_control, detector, estimator
from .core import MTU, US_PER_S, FeedbackReport, Frame, InvariantViolation, Packet, packetize

MODE_BURST = "burst"
MODE_FALLBACK = "fallback"


def _frame_offsets(sizes: list[int]) -> list[int]:
    offsets = []
    total = 0
    for size in sizes:
        offsets.append(total)
        total += size
    return offsets


@dataclass
class CamelParams:
    mtu: int = MTU
    cwnd_min: int = 4 * MTU
    cwnd_max: int = 10 * 1024 * 1024
    initial_cwnd: int = 10 * MTU
    initial_bitrate: float = 300_000.0
    bw_window_us: int = estimator.W_BW_US
    delay_window_us: int = estimator.W_RTPROP_US
    sig_window_us: int = detector.W_SIG_US
    k_thresh: float = detector.K_THRESH
    gamma_floor: float = detector.GAMMA_FLOOR
    m_init: int = burst_control.M_INIT
    m_min: int = burst_control.M_MIN
    m_max: int = burst_control.M_MAX
    epoch_us: int = burst_control.EPOCH_US
    pending_frame_cap: int = 8
    reorder_guard_frames: int = 3
    loss_timeout_min_us: int = 250_000
    srtt_alpha: float = 0.125
    # fallback (paced AIMD) knobs
    fb_overuse_us_per_s: float = 2000.0
    fb_beta: float = 0.85
    fb_step_bps_per_s: float = 50_000.0
    fb_rate_min: float = 50_000.0


@dataclass
class SendDecision:
    packets: list[Packet] = field(default_factory=list)
    next_wakeup: int | None = None


@dataclass
class _SentFrame:
    frame_id: int
    sizes: list[int]
    send_times: list[int | None]
    offsets: list[int]
    outstanding: set[int]  # seq numbers not yet acked or declared lost
    first_packet_inflight: int
    last_send_time: int
    fully_sent: bool = False
    feedback_seen: bool = False
    later_reports: int = 0


class CamelSender:
    """Per-flow sender state machine, driven by on_frame / on_feedback /
    on_timer events. All methods return a SendDecision with the packets to
    emit now (back to back) and the next wakeup time, if any."""

    def __init__(self, flow_id: int, params: CamelParams | None = None,
                 start_mode: str = MODE_BURST):
        self.flow_id = flow_id
        self.params = params or CamelParams()
        p = self.params
        self.mode = start_mode
        self.cwnd = p.initial_cwnd
        self.inflight = 0
        self.windows = estimator.EstimatorWindows(p.bw_window_us, p.delay_window_us)
        self.signal_window = detector.SignalWindow(p.sig_window_us)
        self.gamma_state = detector.GammaState(floor=p.gamma_floor)
        self.burst_state = burst_control.BurstLengthState(
            M=p.m_init, M_min=p.m_min, M_max=p.m_max)
        self.interval_stats = burst_control.IntervalLossStats()
        self.fallback_rate = max(p.fb_rate_min, p.initial_bitrate)
        self.srtt: int | None = None
        self.frame_interval_est = US_PER_S // 30
        self._last_frame_time: int | None = None
        self._sent: dict[int, _SentFrame] = {}
        self._pending: list[Frame] = []
        self._scheduled: list[tuple[int, int, list[int]]] = []  # (due, frame_id, seqs)
        self._pace_next: int = 0
        self._fb_last_update: int | None = None
        self.unknown_reports = 0
        self.app_drops = 0
        self.declared_lost_packets = 0
        self.invariant_checks = 0

    # ------------------------------------------------------------------ events

    def on_frame(self, frame: Frame, now: int) -> SendDecision:
        if self._last_frame_time is not None:
            delta = now - self._last_frame_time
            if delta > 0:
                self.frame_interval_est = int(
                    0.875 * self.frame_interval_est + 0.125 * delta)
        self._last_frame_time = now

        decision = SendDecision()
        if self.mode == MODE_FALLBACK:
            self._pace_frame(frame, now, decision)
        else:
            self._declare_timeouts(now)
            self._pending.append(frame)
            while len(self._pending) > self.params.pending_frame_cap:
                self._pending.pop(0)
                self.app_drops += 1
            self._release_pending(now, decision)
        self._emit_due(now, decision)
        self._check_window_conservation()
        decision.next_wakeup = self._next_wakeup(now)
        return decision

    def on_feedback(self, report: FeedbackReport, now: int) -> SendDecision:
        decision = SendDecision()
        fr = self._sent.get(report.frame_id)
        if fr is None or fr.feedback_seen:
            self.unknown_reports += 1
            return decision
        fr.feedback_seen = True

        for entry in report.entries:
            seq = entry.seq_in_frame
            if seq in fr.outstanding:
                fr.outstanding.discard(seq)
                self.inflight -= fr.sizes[seq - 1]
            burst_control.record_packet(
                self.interval_stats, fr.offsets[seq - 1], entry.lost)

        # paced sends have no back-to-back train: their arrival spacing
        # measures the pacing rate, not the link, so no bandwidth sample
        bw = (estimator.frame_bandwidth(report, fr.sizes)
              if self.mode == MODE_BURST else None)
        delay = estimator.frame_delay(report, fr.send_times)
        if delay is not None:
            if self.srtt is None:
                self.srtt = delay
            else:
                a = self.params.srtt_alpha
                self.srtt = int((1 - a) * self.srtt + a * delay)
            self.windows.add(estimator.FrameSample(
                frame_id=report.frame_id, bandwidth=bw, delay=delay,
                inflight_at_send=fr.first_packet_inflight, sample_time=now))
            self.signal_window.add(now, fr.first_packet_inflight, delay)
        elif bw is not None:
            self.windows.add(estimator.FrameSample(
                frame_id=report.frame_id, bandwidth=bw, delay=0,
                inflight_at_send=fr.first_packet_inflight, sample_time=now))

        if not fr.outstanding:
            del self._sent[report.frame_id]

        self._note_later_report(report.frame_id)
        self._declare_timeouts(now)

        try:
            avg_bw = self.windows.avg_bandwidth()
        except estimator.ColdStartError:
            avg_bw = None
        if avg_bw:
            verdict = detector.detect(self.signal_window, avg_bw, self.params.k_thresh)
            self.gamma_state = detector.update_gamma(self.gamma_state, verdict, now)

        burst_control.update_M(
            self.burst_state, self.interval_stats, now,
            epoch_us=self.params.epoch_us)

        if self.windows.warm:
            bdp = estimator.bdp_estimate(self.windows)
            want = int(self.gamma_state.gamma * bdp)
            self.cwnd = max(self.params.cwnd_min, min(self.params.cwnd_max, want))

        self._update_mode(now)
        if self.mode == MODE_FALLBACK:
            self.fallback_update(report, now)

        self._release_pending(now, decision)
        self._emit_due(now, decision)
        self._check_window_conservation()
        decision.next_wakeup = self._next_wakeup(now)
        return decision

    def on_timer(self, now: int) -> SendDecision:
        decision = SendDecision()
        self._declare_timeouts(now)
        self._emit_due(now, decision)
        if self.mode == MODE_BURST:
            self._release_pending(now, decision)
        self._check_window_conservation()
        decision.next_wakeup = self._next_wakeup(now)
        return decision

    def app_target_bitrate(self) -> float:
        """Rate reported to the application (encoder) layer."""
        if self.mode == MODE_FALLBACK:
            return self.fallback_rate
        try:
            avg_bw = self.windows.avg_bandwidth()
        except estimator.ColdStartError:
            return self.params.initial_bitrate
        return detector.target_bitrate(self.gamma_state.gamma, avg_bw)

    def fallback_update(self, report: FeedbackReport, now: int) -> float:
        """Delay-gradient AIMD on the paced rate; returns the new rate."""
        p = self.params
        grad = detector.time_gradient(self.signal_window)
        if self._fb_last_update is None:
            elapsed = 0.0
        else:
            elapsed = (now - self._fb_last_update) / US_PER_S
        self._fb_last_update = now
        if grad > p.fb_overuse_us_per_s:
            rate = self.fallback_rate * p.fb_beta
        else:
            rate = self.fallback_rate + p.fb_step_bps_per_s * elapsed
        try:
            cap = self.windows.avg_bandwidth()
        except estimator.ColdStartError:
            cap = None
        if cap is not None:
            rate = min(rate, cap)
        self.fallback_rate = max(p.fb_rate_min, rate)
        return self.fallback_rate

    # ------------------------------------------------------------ burst path

    def max_burst(self) -> int:
        return burst_control.max_burst(self.burst_state)

    def _packetize(self, size: int) -> list[int]:
        # Sub-MTU frames are split in two so every frame still forms a
        # measurable arrival train.
        mtu = self.params.mtu
        if size <= mtu and size >= 200:
            mtu = (size + 1) // 2
        return packetize(size, mtu)

    def _commit_frame(self, frame: Frame, now: int, decision: SendDecision) -> None:
        sizes = self._packetize(frame.size)
        fr = _SentFrame(
            frame_id=frame.frame_id,
            sizes=sizes,
            send_times=[None] * len(sizes),
            offsets=_frame_offsets(sizes),
            outstanding=set(),
            first_packet_inflight=self.inflight,
            last_send_time=now,
        )
        self._sent[frame.frame_id] = fr
        chunks = self._chunk(sizes)
        self._emit_chunk(fr, chunks[0], now, decision)
        if len(chunks) > 1:
            spread = min(self.frame_interval_est, self.srtt or self.frame_interval_est)
            gap = max(1, spread // len(chunks))
            for i, seqs in enumerate(chunks[1:], start=1):
                self._scheduled.append((now + i * gap, frame.frame_id, seqs))
        else:
            fr.fully_sent = True

    def _chunk(self, sizes: list[int]) -> list[list[int]]:
        """Greedy split into runs of whole packets with byte sum <= cap."""
        cap = self.max_burst()
        chunks: list[list[int]] = []
        current: list[int] = []
        current_bytes = 0
        for seq, size in enumerate(sizes, start=1):
            if current and current_bytes + size > cap:
                chunks.append(current)
                current = []
                current_bytes = 0
            current.append(seq)
            current_bytes += size
        if current:
            chunks.append(current)
        return chunks

    def _emit_chunk(self, fr: _SentFrame, seqs: list[int], now: int,
                    decision: SendDecision) -> None:
        cap = self.max_burst()
        chunk_bytes = sum(fr.sizes[s - 1] for s in seqs)
        if chunk_bytes > cap and len(seqs) > 1:
            # cap shrank since commit: emit a compliant prefix, requeue the rest
            head: list[int] = []
            head_bytes = 0
            for s in seqs:
                if head and head_bytes + fr.sizes[s - 1] > cap:
                    break
                head.append(s)
                head_bytes += fr.sizes[s - 1]
            tail = seqs[len(head):]
            self._scheduled.append((now + max(1, self.frame_interval_est // 4),
                                    fr.frame_id, tail))
            seqs = head
            chunk_bytes = head_bytes
        if chunk_bytes > cap and len(seqs) > 1:
            raise InvariantViolation("burst exceeds max_burst")
        for seq in seqs:
            size = fr.sizes[seq - 1]
            fr.send_times[seq - 1] = now
            fr.outstanding.add(seq)
            decision.packets.append(Packet(
                flow_id=self.flow_id, frame_id=fr.frame_id, seq_in_frame=seq,
                size=size, send_time=now, frame_packet_count=len(fr.sizes),
                offset_in_frame=fr.offsets[seq - 1]))
            self.inflight += size
        fr.last_send_time = now
        if not any(t is None for t in fr.send_times):
            fr.fully_sent = True

    def _release_pending(self, now: int, decision: SendDecision) -> None:
        while self._pending and self.inflight < self.cwnd:
            self._commit_frame(self._pending.pop(0), now, decision)

    # --------------------------------------------------------- fallback path

    def _pace_frame(self, frame: Frame, now: int, decision: SendDecision) -> None:
        p = self.params
        backlog_cap = self.params.pending_frame_cap * self.frame_interval_est
        if self._pace_next - now > backlog_cap:
            self.app_drops += 1
            return
        sizes = self._packetize(frame.size)
        fr = _SentFrame(
            frame_id=frame.frame_id, sizes=sizes,
            send_times=[None] * len(sizes), offsets=_frame_offsets(sizes),
            outstanding=set(), first_packet_inflight=self.inflight,
            last_send_time=now)
        self._sent[frame.frame_id] = fr
        t = max(now, self._pace_next)
        for seq, size in enumerate(sizes, start=1):
            self._scheduled.append((t, frame.frame_id, [seq]))
            t += int(size * 8 * US_PER_S / self.fallback_rate)
        self._pace_next = t

    # ------------------------------------------------------------- plumbing

    def _emit_due(self, now: int, decision: SendDecision) -> None:
        if not self._scheduled:
            return
        due = [s for s in self._scheduled if s[0] <= now]
        if not due:
            return
        self._scheduled = [s for s in self._scheduled if s[0] > now]
        for _, frame_id, seqs in sorted(due, key=lambda s: (s[0], s[1], s[2][0])):
            fr = self._sent.get(frame_id)
            if fr is None:
                continue  # frame was declared lost before its tail went out
            self._emit_chunk(fr, seqs, now, decision)

    def _next_wakeup(self, now: int) -> int | None:
        if not self._scheduled:
            return None
        return min(s[0] for s in self._scheduled)

    def _note_later_report(self, frame_id: int) -> None:
        guard = self.params.reorder_guard_frames
        stale: list[int] = []
        for fid, fr in self._sent.items():
            if fid < frame_id and fr.fully_sent and not fr.feedback_seen:
                fr.later_reports += 1
                if fr.later_reports >= guard:
                    stale.append(fid)
        for fid in stale:
            self._declare_frame_lost(fid)

    def _declare_timeouts(self, now: int) -> None:
        timeout = max(4 * (self.srtt or 0), self.params.loss_timeout_min_us)
        stale = [fid for fid, fr in self._sent.items()
                 if fr.fully_sent and not fr.feedback_seen
                 and now - fr.last_send_time > timeout]
        for fid in stale:
            self._declare_frame_lost(fid)

    def _declare_frame_lost(self, frame_id: int) -> None:
        fr = self._sent.pop(frame_id)
        for seq in sorted(fr.outstanding):
            self.inflight -= fr.sizes[seq - 1]
            burst_control.record_packet(self.interval_stats, fr.offsets[seq - 1], True)
            self.declared_lost_packets += 1
        fr.outstanding.clear()

    def _update_mode(self, now: int) -> None:
        if self.burst_state.fallback_active and self.mode == MODE_BURST:
            self.mode = MODE_FALLBACK
            self.fallback_rate = max(self.params.fb_rate_min, self.app_target_bitrate())
            self._fb_last_update = now
            self._pace_next = now
            self.app_drops += len(self._pending)
            self._pending.clear()
        elif not self.burst_state.fallback_active and self.mode == MODE_FALLBACK:
            self.mode = MODE_BURST

    def _check_window_conservation(self) -> None:
        tracked = sum(fr.sizes[s - 1] for fr in self._sent.values()
                      for s in fr.outstanding)
        self.invariant_checks += 1
        if tracked != self.inflight:
            raise InvariantViolation(
                f"inflight {self.inflight} != tracked outstanding {tracked}")

    def snapshot(self) -> dict:
        try:
            avg_bw = self.windows.avg_bandwidth()
        except estimator.ColdStartError:
            avg_bw = None
        try:
            min_d = self.windows.min_delay()
        except estimator.ColdStartError:
            min_d = None
        return {
            "mode": self.mode,
            "cwnd": self.cwnd,
            "inflight": self.inflight,
            "gamma": self.gamma_state.gamma,
            "burst_cap": self.max_burst(),
            "avg_bw": avg_bw,
            "min_delay": min_d,
            "reported_bw": self.app_target_bitrate(),
            "pending_frames": len(self._pending),
            "app_drops": self.app_drops,
            "fallback_entries": self.burst_state.fallback_entries,
        }
