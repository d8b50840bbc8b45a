"""Trace morphing: the built-in obfuscation presets (a)-(q), tunneling, and
the stage pipeline that applies them deterministically under a seed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from . import techniques
from .techniques import (
    corrupt,
    delay,
    drop,
    duplicate,
    fragment,
    handshake_packet_ids,
    reorder,
)
from .tunnel import detunnel, tunnel_trace

__all__ = [
    "ObfuscationSpec",
    "PRESETS",
    "apply",
    "corrupt",
    "delay",
    "detunnel",
    "drop",
    "duplicate",
    "fragment",
    "parse_spec_text",
    "reorder",
    "tunnel_trace",
]

OPS = ("delay", "loss", "corrupt", "duplicate", "reorder", "fragment", "tunnel")

# the preset table, stage order delay -> loss -> corrupt -> duplicate -> reorder
PRESETS = {
    "a": [("delay", {"mode": "constant", "c": 1.0, "rto_emulation": True})],
    "b": [("delay", {"mode": "constant", "c": 8.0, "rto_emulation": True})],
    "c": [("delay", {"mode": "normal", "mu": 5.0, "sigma": 2.5, "correlation": 25.0,
                     "rto_emulation": True})],
    "d": [("loss", {"pct": 25.0})],
    "e": [("corrupt", {"pct": 25.0})],
    "f": [("corrupt", {"pct": 35.0})],
    "g": [("corrupt", {"pct": 35.0, "correlation": 25.0})],
    "h": [("duplicate", {"pct": 5.0})],
    "i": [("reorder", {"pct": 25.0, "gap": 0.010, "correlation": 50.0})],
    "j": [("reorder", {"pct": 50.0, "gap": 0.010, "correlation": 50.0})],
    "k": [("fragment", {"mtu": 1000})],
    "l": [("fragment", {"mtu": 750})],
    "m": [("fragment", {"mtu": 500})],
    "n": [("fragment", {"mtu": 250})],
    "o": [
        ("delay", {"mode": "normal", "mu": 0.010, "sigma": 0.020, "correlation": 25.0,
                   "rto_emulation": True}),
        ("loss", {"pct": 23.0}),
        ("corrupt", {"pct": 23.0}),
        ("reorder", {"pct": 23.0, "gap": 0.010}),
    ],
    "p": [
        ("delay", {"mode": "normal", "mu": 7.750, "sigma": 0.150, "correlation": 25.0,
                   "rto_emulation": True}),
        ("loss", {"pct": 0.1}),
        ("corrupt", {"pct": 0.1}),
        ("duplicate", {"pct": 0.1}),
        ("reorder", {"pct": 0.1, "gap": 0.010}),
    ],
    "q": [
        ("delay", {"mode": "normal", "mu": 6.800, "sigma": 0.150, "correlation": 25.0,
                   "rto_emulation": True}),
        ("loss", {"pct": 1.0}),
        ("corrupt", {"pct": 1.0}),
        ("duplicate", {"pct": 1.0}),
        ("reorder", {"pct": 1.0, "gap": 0.010}),
    ],
    "tunnel-http": [("tunnel", {"mode": "http"})],
    "tunnel-https": [("tunnel", {"mode": "https"})],
}


@dataclass(frozen=True)
class ObfuscationSpec:
    """One obfuscation to run: a preset id or a base operation with parameters."""

    technique_id: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def stages(self):
        if self.technique_id in PRESETS:
            stages = [(op, dict(p)) for op, p in PRESETS[self.technique_id]]
            for _, p in stages:
                p.update(self.params)
            return stages
        if self.technique_id in OPS:
            return [(self.technique_id, dict(self.params))]
        raise ConfigError("unknown obfuscation technique %r" % self.technique_id)


def _coerce(value: str):
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def parse_spec_text(text: str):
    """Parse a spec file: one `id key=value ...` line per technique/stage."""
    stages = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        params = {}
        for kv in parts[1:]:
            if "=" not in kv:
                raise ConfigError("spec line %d: expected key=value, got %r" % (lineno, kv))
            key, value = kv.split("=", 1)
            params[key] = _coerce(value)
        stages.append((parts[0], params))
    return stages


def _run_stage(packets, op, params, rng, flow_timeout, exempt_handshake, seed):
    if op == "delay":
        dist = {k: params[k] for k in ("mode", "c", "mu", "sigma") if k in params}
        dist.setdefault("mode", "constant" if "c" in dist else "normal")
        return delay(
            packets, dist, params.get("correlation", 0.0), rng,
            rto_emulation=bool(params.get("rto_emulation", False)),
            flow_timeout=flow_timeout,
        )
    if op == "loss":
        exempt = handshake_packet_ids(packets, flow_timeout) if exempt_handshake else None
        return drop(packets, params["pct"], rng, exempt=exempt)
    if op == "corrupt":
        exempt = handshake_packet_ids(packets, flow_timeout) if exempt_handshake else None
        return corrupt(
            packets,
            params["pct"],
            params.get("correlation", 0.0),
            rng,
            exempt=exempt,
            retransmit=params.get("retransmit", True),
            rto=params.get("rto", techniques.CORRUPT_RTO),
        )
    if op == "duplicate":
        return duplicate(packets, params["pct"], rng)
    if op == "reorder":
        return reorder(
            packets, params["pct"], params.get("gap", 0.010),
            params.get("correlation", 0.0), rng,
        )
    if op == "fragment":
        return fragment(packets, int(params["mtu"]))
    if op == "tunnel":
        return tunnel_trace(
            packets, params.get("mode", "http"), seed, flow_timeout=flow_timeout,
        )
    raise ConfigError("unknown obfuscation stage %r" % op)


def apply(packets, spec: ObfuscationSpec, *, flow_timeout: float = 600.0,
          exempt_handshake: bool = True) -> list:
    """Apply one obfuscation spec (preset or base op) to a packet sequence.

    Deterministic in (packets, spec); the output is re-sorted by the new
    timestamps.  Multi-stage presets derive one child seed per stage from
    the spec seed.
    """
    return apply_stages(
        packets, spec.stages(), spec.seed,
        flow_timeout=flow_timeout, exempt_handshake=exempt_handshake,
    )


def apply_stages(packets, stages, seed: int, *, flow_timeout: float = 600.0,
                 exempt_handshake: bool = True) -> list:
    """Apply stages in order, each consuming the previous output."""
    out = list(packets)
    children = np.random.SeedSequence(seed).spawn(len(stages))
    for (op, params), child in zip(stages, children):
        rng = np.random.Generator(np.random.PCG64(child))
        out = _run_stage(out, op, params, rng, flow_timeout, exempt_handshake, seed)
        out.sort(key=lambda p: p.t_us)
    return out
