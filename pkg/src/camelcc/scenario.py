"""Scenario files: INI-style experiment descriptions.

A scenario names a link (rate schedule or trace file, propagation delay,
buffer, loss, jitter), one or more flows (congestion-controlled senders or
constant-rate cross traffic with their encoder settings), and optional
controller parameter overrides. Example::

    [scenario]
    duration_s = 90
    seed = 7

    [link]
    schedule = 0:2000 30:1000 60:2000
    rtprop_ms = 25
    buffer_bytes = 30000

    [flow.0]
    controller = camel
    fps = 30
    etr = 0.8

    [params]
    k_thresh = 0.5
"""
from __future__ import annotations

import configparser
import dataclasses
import os

from .controller import CamelParams
from .core import MTU, US_PER_S
from .encoder import EncoderConfig
from .netsim import FlowSpec, LinkSpec, ScenarioConfig, load_rate_trace


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _get(section, key, conv, default=None, *, field=""):
    if key not in section:
        if default is None:
            raise ScenarioError(field or key, "missing required key")
        return default
    try:
        return conv(section[key])
    except ValueError as exc:
        raise ScenarioError(field or key, f"bad value {section[key]!r}") from exc


def _parse_steps(text: str, field: str) -> list[tuple[float, float]]:
    """'0:2000 30:1000' -> [(0.0, 2000.0), (30.0, 1000.0)]"""
    steps = []
    for token in text.split():
        try:
            t, v = token.split(":")
            steps.append((float(t), float(v)))
        except ValueError as exc:
            raise ScenarioError(field, f"bad step {token!r}") from exc
    if not steps:
        raise ScenarioError(field, "empty schedule")
    steps.sort(key=lambda s: s[0])
    return steps


def load_scenario(path: str) -> ScenarioConfig:
    if not os.path.isfile(path):
        raise ScenarioError("scenario", f"file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ScenarioError("scenario", f"parse error: {exc}") from exc
    return _build(parser, base_dir=os.path.dirname(os.path.abspath(path)),
                  name=os.path.splitext(os.path.basename(path))[0])


def _build(parser: configparser.ConfigParser, base_dir: str, name: str) -> ScenarioConfig:
    if "scenario" not in parser:
        raise ScenarioError("scenario", "missing [scenario] section")
    sc = parser["scenario"]
    duration_s = _get(sc, "duration_s", float, field="scenario.duration_s")
    if duration_s <= 0:
        raise ScenarioError("scenario.duration_s", "must be > 0")
    seed = _get(sc, "seed", int, 0, field="scenario.seed")

    if "link" not in parser:
        raise ScenarioError("link", "missing [link] section")
    ln = parser["link"]
    if "trace_file" in ln:
        trace_path = os.path.join(base_dir, ln["trace_file"])
        if not os.path.isfile(trace_path):
            raise ScenarioError("link.trace_file", f"file not found: {trace_path}")
        schedule = load_rate_trace(trace_path)
    elif "schedule" in ln:
        steps = _parse_steps(ln["schedule"], "link.schedule")
        schedule = [(int(t * US_PER_S), kbps * 1000.0) for t, kbps in steps]
    else:
        rate_kbps = _get(ln, "rate_kbps", float, field="link.rate_kbps")
        schedule = [(0, rate_kbps * 1000.0)]
    if any(r <= 0 for _, r in schedule):
        raise ScenarioError("link.schedule", "rates must be > 0")
    link = LinkSpec(
        schedule=schedule,
        rtprop_us=int(_get(ln, "rtprop_ms", float, 25.0, field="link.rtprop_ms") * 1000),
        buffer_bytes=_get(ln, "buffer_bytes", int, 30_000, field="link.buffer_bytes"),
        loss_p=_get(ln, "loss_p", float, 0.0, field="link.loss_p"),
        jitter_sigma_us=int(_get(ln, "jitter_sigma_ms", float, 0.0,
                                 field="link.jitter_sigma_ms") * 1000),
        jitter_cap_us=int(_get(ln, "jitter_cap_ms", float, 0.0,
                               field="link.jitter_cap_ms") * 1000),
    )
    if link.buffer_bytes < MTU:
        raise ScenarioError("link.buffer_bytes", f"must be >= one MTU ({MTU})")
    if not 0.0 <= link.loss_p < 1.0:
        raise ScenarioError("link.loss_p", "must be in [0, 1)")

    flow_sections = sorted(s for s in parser.sections() if s.startswith("flow."))
    if not flow_sections:
        raise ScenarioError("flow", "at least one [flow.N] section required")
    flows = []
    for sec_name in flow_sections:
        sec = parser[sec_name]
        controller = sec.get("controller", "camel")
        start_us = int(_get(sec, "start_s", float, 0.0,
                            field=f"{sec_name}.start_s") * US_PER_S)
        if controller == "cross":
            rate_kbps = _get(sec, "rate_kbps", float, field=f"{sec_name}.rate_kbps")
            flows.append(FlowSpec(controller="cross", start_us=start_us,
                                  rate_bps=rate_kbps * 1000.0))
            continue
        if controller not in ("camel", "fallback-only"):
            raise ScenarioError(f"{sec_name}.controller",
                                f"unknown controller {controller!r}")
        enc = EncoderConfig(
            fps=_get(sec, "fps", int, 30, field=f"{sec_name}.fps"),
            gop_length=_get(sec, "gop_length", int, 1, field=f"{sec_name}.gop_length"),
            i_to_p_ratio=_get(sec, "i_to_p_ratio", float, 1.0,
                              field=f"{sec_name}.i_to_p_ratio"),
            etr=_get(sec, "etr", float, 1.0, field=f"{sec_name}.etr"),
            size_jitter_cv=_get(sec, "size_jitter_cv", float, 0.0,
                                field=f"{sec_name}.size_jitter_cv"),
        )
        if "etr_schedule" in sec:
            steps = _parse_steps(sec["etr_schedule"], f"{sec_name}.etr_schedule")
            enc.etr_schedule = [(int(t * US_PER_S), e) for t, e in steps]
        if enc.fps <= 0:
            raise ScenarioError(f"{sec_name}.fps", "must be > 0")
        if not 0.0 < enc.etr <= 1.0:
            raise ScenarioError(f"{sec_name}.etr", "must be in (0, 1]")
        flows.append(FlowSpec(controller=controller, start_us=start_us, encoder=enc))

    params = CamelParams()
    snapshot_interval_us = 100_000
    if "params" in parser:
        fields = {f.name: f for f in dataclasses.fields(CamelParams)}
        for key, raw in parser["params"].items():
            if key == "snapshot_interval_ms":
                snapshot_interval_us = int(float(raw) * 1000)
                continue
            if key not in fields:
                raise ScenarioError(f"params.{key}", "unknown parameter")
            try:
                value = (int(raw) if isinstance(getattr(params, key), int)
                         else float(raw))
            except ValueError as exc:
                raise ScenarioError(f"params.{key}", f"bad value {raw!r}") from exc
            setattr(params, key, value)

    return ScenarioConfig(
        duration_us=int(duration_s * US_PER_S),
        seed=seed,
        link=link,
        flows=flows,
        params=params,
        snapshot_interval_us=snapshot_interval_us,
        name=name,
    )


def apply_override(scenario: ScenarioConfig, path: str, value: float) -> None:
    """Set one addressable scenario field, e.g. 'link.buffer_bytes' or
    'flow.0.etr' or 'params.k_thresh'. Raises ScenarioError for unknown
    paths."""
    parts = path.split(".")
    try:
        if parts[0] == "scenario" and len(parts) == 2:
            if parts[1] == "duration_s":
                scenario.duration_us = int(value * US_PER_S)
            elif parts[1] == "seed":
                scenario.seed = int(value)
            else:
                raise KeyError
        elif parts[0] == "link" and len(parts) == 2:
            if parts[1] == "rate_kbps":
                scenario.link.schedule = [(0, value * 1000.0)]
            elif parts[1] == "buffer_bytes":
                scenario.link.buffer_bytes = int(value)
            elif parts[1] == "loss_p":
                scenario.link.loss_p = value
            elif parts[1] == "rtprop_ms":
                scenario.link.rtprop_us = int(value * 1000)
            elif parts[1] == "jitter_sigma_ms":
                scenario.link.jitter_sigma_us = int(value * 1000)
            elif parts[1] == "jitter_cap_ms":
                scenario.link.jitter_cap_us = int(value * 1000)
            else:
                raise KeyError
        elif parts[0] == "flow" and len(parts) == 3:
            flow = scenario.flows[int(parts[1])]
            if parts[2] == "start_s":
                flow.start_us = int(value * US_PER_S)
            elif parts[2] == "rate_kbps" and flow.controller == "cross":
                flow.rate_bps = value * 1000.0
            elif flow.encoder is not None and parts[2] in (
                    "fps", "gop_length", "i_to_p_ratio", "etr", "size_jitter_cv"):
                current = getattr(flow.encoder, parts[2])
                setattr(flow.encoder, parts[2],
                        int(value) if isinstance(current, int) else value)
            else:
                raise KeyError
        elif parts[0] == "params" and len(parts) == 2:
            current = getattr(scenario.params, parts[1])
            setattr(scenario.params, parts[1],
                    int(value) if isinstance(current, int) else value)
        else:
            raise KeyError
    except (KeyError, IndexError, AttributeError):
        raise ScenarioError(path, "not an addressable scenario parameter") from None
