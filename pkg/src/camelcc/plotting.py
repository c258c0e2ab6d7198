"""Figure rendering for run reports (PNG files next to the CSV output)."""
from __future__ import annotations

import os

from .core import US_PER_S
from .netsim import RunLog, ScenarioConfig


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_run_figures(log: RunLog, scenario: ScenarioConfig, out_dir: str) -> list[str]:
    plt = _plt()
    fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)
    flows = sorted({s.flow for s in log.snapshots})

    ax = axes[0][0]
    for f in flows:
        pts = [(s.time / US_PER_S, s.reported_bw / 1000) for s in log.snapshots
               if s.flow == f]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"flow {f}")
    sched = scenario.link.schedule + [(scenario.duration_us, scenario.link.schedule[-1][1])]
    ax.step([t / US_PER_S for t, _ in sched], [r / 1000 for _, r in sched],
            where="post", color="k", ls="--", lw=1, label="link rate")
    ax.set_ylabel("reported rate (kbps)")
    ax.legend(fontsize=8)

    ax = axes[0][1]
    for f in flows:
        pts = [(s.time / US_PER_S, s.gamma) for s in log.snapshots if s.flow == f]
        ax.plot([p[0] for p in pts], [p[1] for p in pts])
    ax.set_ylabel("gamma")
    ax.set_ylim(0, 1.05)

    ax = axes[1][0]
    for f in flows:
        pts = [(s.time / US_PER_S, s.burst_cap / 1024) for s in log.snapshots
               if s.flow == f]
        ax.plot([p[0] for p in pts], [p[1] for p in pts])
    ax.set_ylabel("burst cap (KiB)")
    ax.set_xlabel("time (s)")

    ax = axes[1][1]
    for f in flows:
        pts = [(d.delivery_time / US_PER_S, (d.delivery_time - d.encode_time) / 1000)
               for d in log.frame_deliveries if d.flow == f]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], ".", ms=2)
    ax.set_ylabel("frame delay (ms)")
    ax.set_xlabel("time (s)")

    fig.suptitle(scenario.name)
    fig.tight_layout()
    path = os.path.join(out_dir, "run_overview.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_signal_figure(rows: list[dict], out_dir: str) -> list[str]:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r["signal"] for r in rows]
    means = [r["mean_accuracy"] for r in rows]
    lo = [r["mean_accuracy"] - r["min_accuracy"] for r in rows]
    hi = [r["max_accuracy"] - r["mean_accuracy"] for r in rows]
    ax.bar(names, means, yerr=[lo, hi], capsize=4, color=["C0", "C1", "C2"])
    ax.set_ylabel("detection accuracy")
    ax.set_ylim(0, 1.0)
    fig.tight_layout()
    path = os.path.join(out_dir, "signal_accuracy.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_sweep_figure(rows: list[dict], param: str, out_dir: str) -> list[str]:
    plt = _plt()
    numeric_keys = [k for k in rows[0]
                    if k != "value" and isinstance(rows[0][k], (int, float))]
    keys = [k for k in ("media_bitrate_bps", "stalling_ratio",
                        "bw_estimation_accuracy", "steady_state_M")
            if k in numeric_keys] or numeric_keys[:4]
    fig, axes = plt.subplots(1, len(keys), figsize=(4 * len(keys), 3.5))
    if len(keys) == 1:
        axes = [axes]
    xs = [r["value"] for r in rows]
    for ax, key in zip(axes, keys):
        ax.plot(xs, [r.get(key) for r in rows], "o-")
        ax.set_xlabel(param)
        ax.set_ylabel(key)
    fig.tight_layout()
    path = os.path.join(out_dir, "sweep.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
