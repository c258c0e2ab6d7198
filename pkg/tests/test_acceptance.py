"""End-to-end acceptance checks, one per shipped claim. Each test prints a
single PASS/FAIL line (run with -s to see them live)."""
import glob
import os
import random
import time

import pytest

from camelcc import cli, metrics
from camelcc.core import US_PER_S
from camelcc.detector import CongestionVerdict, GammaState, update_gamma
from camelcc.experiments import SignalExpConfig, run_signal_experiment
from camelcc.netsim import probe_frames, run
from camelcc.scenario import apply_override, load_scenario

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


def scenario_path(name):
    return os.path.join(SCENARIO_DIR, name)


def _verdict(number, name, ok, detail=""):
    print(f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {number} {name}: {detail}"


@pytest.fixture(scope="module")
def collected_logs():
    """RunLogs gathered by the criteria, checked again by criterion 10."""
    return []


@pytest.fixture(scope="module")
def undershoot_run(collected_logs):
    sc = load_scenario(scenario_path("undershoot_90.ini"))
    t0 = time.perf_counter()
    log = run(sc)
    collected_logs.append((sc, log))
    return sc, log, time.perf_counter() - t0


@pytest.fixture(scope="module")
def step_run(collected_logs):
    sc = load_scenario(scenario_path("step_responsiveness.ini"))
    log = run(sc)
    collected_logs.append((sc, log))
    return sc, log


@pytest.fixture(scope="module")
def sweep_runs(collected_logs):
    out = {}
    for buf in (2048, 4096, 6144, 8192, 10240):
        sc = load_scenario(scenario_path("buffer_sweep_base.ini"))
        apply_override(sc, "link.buffer_bytes", buf)
        log = run(sc)
        collected_logs.append((sc, log))
        out[buf] = (sc, log)
    return out


@pytest.fixture(scope="module")
def loss_run(collected_logs):
    sc = load_scenario(scenario_path("physical_loss.ini"))
    log = run(sc)
    collected_logs.append((sc, log))
    return sc, log


@pytest.fixture(scope="module")
def fairness_runs(collected_logs):
    single = load_scenario(scenario_path("fairness_single.ini"))
    three = load_scenario(scenario_path("fairness_three.ini"))
    single_log = run(single)
    three_log = run(three)
    collected_logs.append((single, single_log))
    collected_logs.append((three, three_log))
    return (single, single_log), (three, three_log)


def test_c01_signal_accuracy_ordering():
    t0 = time.perf_counter()
    rows = {r["signal"]: r["mean_accuracy"]
            for r in run_signal_experiment(SignalExpConfig(n_traces=20))}
    elapsed = time.perf_counter() - t0
    margin_minrtt = rows["inflight_gradient"] - rows["minrtt"]
    margin_tgrad = rows["inflight_gradient"] - rows["time_gradient"]
    ok = margin_minrtt >= 0.05 and margin_tgrad >= 0.05 and elapsed < 10.0
    _verdict(1, "signal-accuracy-ordering", ok,
             f"inflight={rows['inflight_gradient']:.3f} "
             f"margins=+{margin_minrtt:.3f}/+{margin_tgrad:.3f} {elapsed:.1f}s")


def test_c02_undershooting_estimation_accuracy(undershoot_run):
    sc, log, elapsed = undershoot_run
    samples = [(s.time, s.avg_bw if s.avg_bw is not None else s.reported_bw)
               for s in log.snapshots]
    acc = metrics.bw_estimation_accuracy(
        samples, sc.link.schedule, 30 * US_PER_S, 60 * US_PER_S)
    ok = acc >= 0.95 and elapsed < 5.0
    _verdict(2, "undershooting-accuracy", ok,
             f"accuracy={acc:.4f} over the 60% interval, {elapsed:.1f}s")


def test_c03_step_responsiveness(step_run):
    sc, log = step_run
    regimes = [(30 * US_PER_S, 60 * US_PER_S, 1_000_000.0),
               (60 * US_PER_S, 90 * US_PER_S, 2_000_000.0)]
    worst = 0.0
    ok = True
    for start, end, rate in regimes:
        for s in log.snapshots:
            if start + 5 * US_PER_S <= s.time < end and s.avg_bw is not None:
                err = abs(s.avg_bw - rate) / rate
                worst = max(worst, err)
                ok = ok and err <= 0.10
    _verdict(3, "step-responsiveness", ok,
             f"worst estimate error after settle={worst:.3f}")


def test_c04_idle_gap_immunity():
    from camelcc.netsim import LinkSpec
    link = LinkSpec(schedule=[(0, 2_000_000.0)], rtprop_us=25_000,
                    buffer_bytes=100_000)
    base, gapped, t = [], [], 0
    rng = random.Random(11)
    for i in range(60):
        base.append((i * 80_000, 4000 + 400 * (i % 7)))
        t += 80_000 + rng.randrange(0, 700_000)
        gapped.append((t, 4000 + 400 * (i % 7)))
    a = probe_frames(link, base)
    b = probe_frames(link, gapped)
    worst = 0.0
    for sa, sb in zip(a, b):
        worst = max(worst, abs(sa.bandwidth - sb.bandwidth) / sa.bandwidth,
                    abs(sa.delay - sb.delay) / sa.delay)
    ok = worst <= 0.001
    _verdict(4, "idle-gap-immunity", ok, f"worst per-frame deviation={worst:.6f}")


def test_c05_burst_length_adaptation(sweep_runs):
    steady = {}
    entered_fb = {}
    for buf, (sc, log) in sweep_runs.items():
        cut = sc.duration_us - 50 * US_PER_S
        caps = sorted(s.burst_cap for s in log.snapshots if s.time >= cut)
        steady[buf] = caps[len(caps) // 2]
        entered_fb[buf] = any(s.fallback_entries > 0 for s in log.snapshots)
    bufs = sorted(steady)
    ms = [steady[b] for b in bufs]
    ok = (all(a <= b for a, b in zip(ms, ms[1:]))
          and entered_fb[2048]
          and steady[10240] >= 8192)
    _verdict(5, "burst-length-adaptation", ok,
             f"steady M={ms} fallback@2KB={entered_fb[2048]}")


def test_c06_physical_loss_discrimination(loss_run):
    sc, log = loss_run
    peak = max(s.burst_cap for s in log.snapshots)
    fb = any(s.fallback_entries > 0 for s in log.snapshots)
    ok = peak >= sc.params.m_max and not fb
    _verdict(6, "physical-loss-discrimination", ok,
             f"peak M={peak} fallback={fb} under 5% uniform loss")


def test_c07_gamma_dynamics():
    state = GammaState()
    congested = CongestionVerdict(True, 4.0, 2.0)
    for _ in range(3):
        state = update_gamma(state, congested)
    exact = state.gamma == 1.0 * 0.95 * 0.95 * 0.95
    close = abs(state.gamma - 0.857375) < 1e-12
    state = update_gamma(state, CongestionVerdict(False, 0.0, 2.0))
    restored = state.gamma == 1.0
    ok = exact and close and restored
    _verdict(7, "gamma-dynamics", ok,
             f"0.95^3={0.95 ** 3!r} restored={restored}")


def test_c08_inter_flow_fairness(fairness_runs):
    (ssc, slog), (tsc, tlog) = fairness_runs
    _, base_p95 = metrics.frame_delay_quantiles(slog, 0)
    end = tsc.duration_us
    tputs = [metrics.media_bitrate(tlog, i, end - 20 * US_PER_S, end)
             for i in range(3)]
    jain = metrics.fairness_index(tputs)
    p95s = [metrics.frame_delay_quantiles(tlog, i)[1] for i in range(3)]
    ok = jain >= 0.9 and all(p <= 2 * base_p95 for p in p95s)
    _verdict(8, "inter-flow-fairness", ok,
             f"jain={jain:.3f} p95s={[round(p / 1000) for p in p95s]}ms "
             f"limit={2 * base_p95 / 1000:.0f}ms")


def test_c09_determinism(tmp_path):
    mismatches = []
    for path in sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.ini"))):
        name = os.path.basename(path)
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name}.{tag}"
            code = cli.main(["run", path, "--out", str(out), "--no-figures"])
            assert code == 0, f"{name} exited {code}"
            outs.append(out)
        for artifact in ("runlog.csv", "metrics.json"):
            if (outs[0] / artifact).read_bytes() != (outs[1] / artifact).read_bytes():
                mismatches.append(f"{name}:{artifact}")
    ok = not mismatches
    _verdict(9, "determinism", ok, f"mismatches={mismatches or 'none'}")


def test_c10_invariant_suite(collected_logs):
    checks = 0
    problems = []
    for sc, log in collected_logs:
        checks += log.invariant_checks
        floor = sc.params.gamma_floor
        last_cap = {}
        for s in log.snapshots:
            if not (floor - 1e-12 <= s.gamma <= 1.0 + 1e-12):
                problems.append(f"gamma={s.gamma} at t={s.time}")
            if s.flow in last_cap and abs(s.burst_cap - last_cap[s.flow]) > 2048:
                problems.append(f"M step {last_cap[s.flow]}->{s.burst_cap}")
            last_cap[s.flow] = s.burst_cap
    ok = checks > 0 and not problems
    _verdict(10, "invariant-suite", ok,
             f"checks={checks} violations={problems[:3] or 'none'}")
