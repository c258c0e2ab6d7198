import pytest

from camelcc.controller import (MODE_BURST, MODE_FALLBACK, CamelParams,
                                CamelSender)
from camelcc.core import FeedbackEntry, FeedbackReport, Frame


def make_sender(**kw):
    mode = kw.pop("mode", MODE_BURST)
    sender = CamelSender(0, CamelParams(**kw), start_mode=mode)
    if mode == MODE_FALLBACK:
        sender.burst_state.fallback_active = True
    return sender


def frame(frame_id, size, t=0):
    return Frame(frame_id=frame_id, kind="P", size=size, encode_time=t)


def ack_report(packets, delay_us=30_000, spacing_us=4_800):
    """Feedback acknowledging every packet, arrivals spaced like a train."""
    frame_id = packets[0].frame_id
    entries = [
        FeedbackEntry(p.seq_in_frame,
                      p.send_time + delay_us + (p.seq_in_frame - 1) * spacing_us,
                      False)
        for p in sorted(packets, key=lambda p: p.seq_in_frame)]
    sent = max(e.recv_time for e in entries)
    return FeedbackReport(flow_id=0, frame_id=frame_id, entries=entries,
                          sent_time=sent, report_arrival_time=sent + 12_500)


def collect_packets(sender, decision, until_us=1_000_000):
    """Drain scheduled chunks by firing wakeups; returns all emitted packets."""
    packets = list(decision.packets)
    wake = decision.next_wakeup
    while wake is not None and wake <= until_us:
        d = sender.on_timer(wake)
        packets.extend(d.packets)
        wake = d.next_wakeup
    return packets


class TestOnFrame:
    def test_small_frame_is_one_burst(self):
        sender = make_sender()
        d = sender.on_frame(frame(0, 6000), now=0)
        assert len(d.packets) == 5
        assert all(p.send_time == 0 for p in d.packets)
        assert d.next_wakeup is None

    def test_oversized_frame_splits_into_three_bursts(self):
        sender = make_sender(cwnd_max=100_000, initial_cwnd=50_000)
        d = sender.on_frame(frame(0, 20_000), now=0)
        packets = collect_packets(sender, d)
        assert len(packets) == 17
        assert sum(p.size for p in packets) == 20_000
        send_times = sorted({p.send_time for p in packets})
        assert len(send_times) == 3
        for t in send_times:
            burst = sum(p.size for p in packets if p.send_time == t)
            assert burst <= sender.max_burst()

    def test_offsets_are_frame_relative(self):
        sender = make_sender(initial_cwnd=50_000)
        d = sender.on_frame(frame(0, 20_000), now=0)
        packets = collect_packets(sender, d)
        offsets = sorted(p.offset_in_frame for p in packets)
        assert offsets[0] == 0 and offsets[-1] == 19_200

    def test_window_gates_commit(self):
        sender = make_sender(initial_cwnd=4800)
        d0 = sender.on_frame(frame(0, 4800), now=0)
        assert len(d0.packets) == 4
        d1 = sender.on_frame(frame(1, 4800), now=33_000)
        assert d1.packets == []  # inflight 4800 >= cwnd, frame queued
        assert sender.snapshot()["pending_frames"] == 1

    def test_pending_cap_drops_oldest(self):
        sender = make_sender(initial_cwnd=4800, pending_frame_cap=2,
                             loss_timeout_min_us=10_000_000)
        sender.on_frame(frame(0, 4800), now=0)
        for i in range(1, 5):
            sender.on_frame(frame(i, 4800), now=i * 33_000)
        assert sender.app_drops == 2
        assert sender.snapshot()["pending_frames"] == 2


class TestOnFeedback:
    def test_ack_decrements_inflight_and_sets_cwnd(self):
        sender = make_sender()
        d = sender.on_frame(frame(0, 6000), now=0)
        assert sender.inflight == 6000
        sender.on_feedback(ack_report(d.packets), now=50_000)
        assert sender.inflight == 0
        # one warm sample: cwnd tracks gamma * bdp exactly
        bw = sender.windows.avg_bandwidth()
        bdp = int(bw * sender.windows.min_delay() / 8e6)
        want = int(sender.gamma_state.gamma * bdp)
        assert sender.cwnd == max(4800, min(want, sender.params.cwnd_max))

    def test_unknown_frame_counted_and_ignored(self):
        sender = make_sender()
        report = FeedbackReport(flow_id=0, frame_id=99,
                                entries=[FeedbackEntry(1, 1000, False)],
                                sent_time=1000, report_arrival_time=2000)
        sender.on_feedback(report, now=2000)
        assert sender.unknown_reports == 1
        assert sender.inflight == 0

    def test_feedback_releases_pending(self):
        sender = make_sender(initial_cwnd=4800)
        d0 = sender.on_frame(frame(0, 4800), now=0)
        sender.on_frame(frame(1, 4800), now=33_000)
        d = sender.on_feedback(ack_report(d0.packets), now=60_000)
        assert len(d.packets) == 4
        assert {p.frame_id for p in d.packets} == {1}

    def test_reorder_guard_declares_stale_frame(self):
        sender = make_sender(initial_cwnd=50_000, reorder_guard_frames=3,
                             loss_timeout_min_us=10_000_000)
        lost_d = sender.on_frame(frame(0, 2400), now=0)
        later = [sender.on_frame(frame(i, 2400), now=i * 33_000)
                 for i in range(1, 5)]
        assert sender.inflight == 5 * 2400
        for i, d in enumerate(later, start=1):
            sender.on_feedback(ack_report(d.packets), now=i * 33_000 + 40_000)
        # three reports for later frames declare frame 0 lost
        assert sender.inflight == 0
        assert sender.declared_lost_packets == len(lost_d.packets)

    def test_timeout_declares_lost_frame(self):
        sender = make_sender(loss_timeout_min_us=250_000)
        sender.on_frame(frame(0, 2400), now=0)
        assert sender.inflight == 2400
        sender.on_frame(frame(1, 2400), now=300_000)
        assert sender.inflight == 2400 + 2400 - 2400  # frame 0 declared


class TestFallbackMode:
    def test_paced_emission(self):
        sender = make_sender(mode=MODE_FALLBACK)
        sender.fallback_rate = 1_000_000.0
        d = sender.on_frame(frame(0, 6000), now=0)
        packets = collect_packets(sender, d)
        assert len(packets) == 5
        gaps = [b.send_time - a.send_time
                for a, b in zip(packets, packets[1:])]
        assert gaps == [9600] * 4  # 1200 B at 1 Mbps

    def test_app_target_is_fallback_rate(self):
        sender = make_sender(mode=MODE_FALLBACK)
        sender.fallback_rate = 400_000.0
        assert sender.app_target_bitrate() == 400_000.0

    def test_multiplicative_decrease_on_overuse(self):
        sender = make_sender(mode=MODE_FALLBACK)
        sender.fallback_rate = 1_000_000.0
        # rising delay vs time in the signal window
        for i, delay in enumerate([25_000, 30_000, 35_000]):
            sender.signal_window.add(i * 1_000_000, 1000 + i, delay)
        report = FeedbackReport(0, 0, [], 0, 0)
        rate = sender.fallback_update(report, now=3_000_000)
        assert rate == pytest.approx(850_000.0)

    def test_additive_increase_prorated(self):
        sender = make_sender(mode=MODE_FALLBACK)
        sender.fallback_rate = 850_000.0
        sender._fb_last_update = 0
        report = FeedbackReport(0, 0, [], 0, 0)
        rate = sender.fallback_update(report, now=1_000_000)
        assert rate == pytest.approx(900_000.0)

    def test_rate_clamped_to_estimated_bandwidth(self):
        sender = make_sender(mode=MODE_FALLBACK)
        from camelcc.estimator import FrameSample
        sender.windows.add(FrameSample(0, 700_000.0, 30_000, 0, 0))
        sender.fallback_rate = 900_000.0
        sender._fb_last_update = 0
        rate = sender.fallback_update(FeedbackReport(0, 0, [], 0, 0), now=1_000_000)
        assert rate == pytest.approx(700_000.0)


class TestAppTarget:
    def test_cold_start_uses_initial_bitrate(self):
        sender = make_sender()
        assert sender.app_target_bitrate() == 300_000.0

    def test_warm_target_is_gamma_times_avg_bw(self):
        sender = make_sender()
        d = sender.on_frame(frame(0, 6000), now=0)
        sender.on_feedback(ack_report(d.packets), now=50_000)
        bw = sender.windows.avg_bandwidth()
        assert sender.app_target_bitrate() == pytest.approx(
            sender.gamma_state.gamma * bw)
