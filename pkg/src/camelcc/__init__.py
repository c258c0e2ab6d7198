"""Frame-level congestion control with a deterministic network simulator."""

from .controller import CamelParams, CamelSender, SendDecision
from .core import MTU, FeedbackReport, Frame, Packet, SimClock, packetize
from .encoder import EncoderConfig, EncoderState, next_frame
from .estimator import EstimatorWindows, FrameSample, bdp_estimate, frame_bandwidth, frame_delay
from .detector import (CongestionVerdict, GammaState, SignalWindow, detect,
                       inflight_gradient, minrtt_signal, time_gradient,
                       target_bitrate, update_gamma)
from .burst_control import (BurstLengthState, IntervalLossStats, max_burst,
                            physical_loss_rate, record_packet, update_M)
from .netsim import (DropTailLink, FlowSpec, LinkSpec, RunLog, ScenarioConfig,
                     analytic_rtt, probe_frames, run, synth_trace)
from .scenario import load_scenario

__all__ = [
    "CamelParams", "CamelSender", "SendDecision", "MTU", "FeedbackReport",
    "Frame", "Packet", "SimClock", "packetize", "EncoderConfig",
    "EncoderState", "next_frame", "EstimatorWindows", "FrameSample",
    "bdp_estimate", "frame_bandwidth", "frame_delay", "CongestionVerdict",
    "GammaState", "SignalWindow", "detect", "inflight_gradient",
    "minrtt_signal", "time_gradient", "target_bitrate", "update_gamma",
    "BurstLengthState", "IntervalLossStats", "max_burst",
    "physical_loss_rate", "record_packet", "update_M", "DropTailLink",
    "FlowSpec", "LinkSpec", "RunLog", "ScenarioConfig", "analytic_rtt",
    "probe_frames", "run", "synth_trace", "load_scenario",
]
