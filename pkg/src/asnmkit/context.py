"""Sliding-window context of an analyzed connection.

The window of length tau is centered at the analyzed connection's start
time; a neighbor belongs to the context when it starts after the left edge
and ends before the right edge (strict inequalities, so long-lived
neighbors overlapping an edge are excluded).  The analyzed connection is
never its own neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainError

DEFAULT_TAU = 300.0
MUTUAL_HORIZON = 300.0


@dataclass
class ConnectionContext:
    center: object
    tau: float
    members: list = field(default_factory=list)
    window_shift: float = 0.0
    universe: tuple = ()  # full connection set, for horizon queries


def sliding_window(all_connections, center, tau: float) -> ConnectionContext:
    """Collect the context members of `center` within a window of length `tau`."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    if not any(c is center for c in all_connections):
        raise DomainError("center connection is not part of the connection set")
    half = tau / 2.0
    lo = center.t_s - half
    hi = center.t_s + half
    members = [
        c
        for c in all_connections
        if c is not center and c.t_s > lo and c.t_e < hi
    ]
    later_starts = [c.t_s for c in all_connections if c.t_s > center.t_s]
    shift = (min(later_starts) - center.t_s) if later_starts else 0.0
    return ConnectionContext(
        center=center,
        tau=tau,
        members=members,
        window_shift=shift,
        universe=tuple(all_connections),
    )


def mutual_flows(all_connections, center, horizon: float, side: str) -> int:
    """Count same-endpoint-pair connections starting within `horizon` seconds
    before the center's start ('before') or after its end ('after')."""
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    pair = frozenset((center.ip_c, center.ip_s))
    n = 0
    for c in all_connections:
        if c is center or frozenset((c.ip_c, c.ip_s)) != pair:
            continue
        if side == "before":
            if center.t_s - horizon <= c.t_s < center.t_s:
                n += 1
        elif side == "after":
            if center.t_e < c.t_s <= center.t_e + horizon:
                n += 1
        else:
            raise DomainError("side must be 'before' or 'after'")
    return n
