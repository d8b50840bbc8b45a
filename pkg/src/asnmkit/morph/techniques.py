"""Non-payload trace transformations: delay, loss, corruption, duplication,
reordering, and IPv4 fragmentation.

Correlation follows the netem AR(1) convention for both delay values and
selection decisions: x_i = rho*x_{i-1} + (1-rho)*u_i.  Every operation is
deterministic given its RNG.  Loss and corruption exempt the first three
packets of each assembled connection so morphed traces stay assemblable;
corruption additionally emits the retransmission a real sender would
produce after the receiver drops the damaged segment, which is what makes
the technique visible to non-payload features.
"""

from __future__ import annotations

import numpy as np

from ..capture import SYN, KIND_IPV4, KIND_RAW, KIND_TCP, encode_frame, ipv4_checksum
from ..errors import ConfigError
from ..flows import assemble_connections

CORRUPT_RTO = 0.2  # seconds until the emulated retransmission
MIN_MTU = 68


def _check_pct(pct):
    if not 0.0 <= pct <= 100.0:
        raise ConfigError("percentage %r outside [0, 100]" % pct)
    return pct / 100.0


def _ar1(samples: np.ndarray, correlation: float) -> np.ndarray:
    rho = correlation / 100.0
    if rho == 0.0 or samples.size == 0:
        return samples
    out = np.empty_like(samples)
    prev = samples[0]
    out[0] = prev
    for i in range(1, samples.size):
        prev = rho * prev + (1.0 - rho) * samples[i]
        out[i] = prev
    return out


def _select(n: int, pct: float, correlation: float, rng) -> np.ndarray:
    """Correlated Bernoulli selection mask over n packets."""
    p = _check_pct(pct)
    if n == 0 or p == 0.0:
        return np.zeros(n, dtype=bool)
    return _ar1(rng.random(n), correlation) < p


def handshake_packet_ids(packets, flow_timeout: float = 600.0) -> set:
    """ids of the first three packets of every assembled connection."""
    conns, _ = assemble_connections(packets, timeout=flow_timeout)
    exempt = set()
    for conn in conns:
        for pkt in conn.ordered_packets()[:3]:
            exempt.add(id(pkt))
    return exempt


# client retransmission-timeout ladder (seconds after the first SYN)
RTO_LADDER = (1.0, 3.0, 7.0, 15.0, 31.0)


def delay(packets, dist: dict, correlation: float, rng,
          rto_emulation: bool = False, flow_timeout: float = 600.0) -> list:
    """Shift every packet by a per-packet delay; constant or normal(mu, sigma).

    Release times stay monotone within each connection (a reply cannot
    precede the packet it answers; live traffic enforced this through TCP
    self-clocking).  Reordering is its own technique.

    With `rto_emulation`, handshakes whose round trip grows past the
    client's retransmission timeout gain the duplicate SYNs a live capture
    would show, placed inside the SYN/SYN-ACK capture window.  The extras
    are appended; callers re-sort by time.
    """
    n = len(packets)
    mode = dist.get("mode", "constant")
    if mode == "constant":
        delays = np.full(n, float(dist["c"]))
    elif mode == "normal":
        sigma = float(dist["sigma"])
        if sigma < 0:
            raise ConfigError("sigma must be >= 0")
        delays = _ar1(rng.normal(float(dist["mu"]), sigma, n), correlation)
    else:
        raise ConfigError("unknown delay mode %r" % mode)
    delays = np.maximum(delays, 0.0)
    out = []
    last_release: dict = {}
    for pkt, d in zip(packets, delays):
        t_new = pkt.t_us + int(round(d * 1_000_000))
        if pkt.is_tcp:
            a = (pkt.ip_src, pkt.tcp_sport)
            b = (pkt.ip_dst, pkt.tcp_dport)
            key = (a, b) if a <= b else (b, a)
            t_new = max(t_new, last_release.get(key, t_new))
            last_release[key] = t_new
        out.append(pkt.copy(t_us=t_new))
    if rto_emulation:
        out.extend(_rto_syn_retransmissions(packets, out, delays, flow_timeout))
    return out


def _rto_syn_retransmissions(packets, delayed, delays, flow_timeout):
    """Duplicate SYNs a client would emit while waiting out the added RTT."""
    index_of = {id(p): i for i, p in enumerate(packets)}
    conns, _ = assemble_connections(packets, timeout=flow_timeout)
    extras = []
    for conn in conns:
        ordered = conn.ordered_packets()
        syn = ordered[0]
        synack = next(
            (p for p in ordered if not conn.is_outbound(p) and p.flag(SYN)),
            None,
        )
        if synack is None:
            continue
        i, j = index_of[id(syn)], index_of[id(synack)]
        # wall-clock wait the client experienced: both crossings plus
        # whatever gap the original capture already had
        wait = delays[i] + delays[j] + (synack.t_us - syn.t_us) / 1_000_000.0
        window = delayed[j].t_us - delayed[i].t_us
        if window <= 1:
            continue
        for step in RTO_LADDER:
            if step >= wait:
                break
            t_k = delayed[i].t_us + int(window * step / wait)
            t_k = max(delayed[i].t_us + 1, min(t_k, delayed[j].t_us - 1))
            extras.append(delayed[i].copy(t_us=t_k))
    return extras


def drop(packets, pct: float, rng, exempt: set | None = None) -> list:
    """Drop each packet independently with probability pct/100."""
    mask = _select(len(packets), pct, 0.0, rng)
    exempt = exempt or set()
    return [
        pkt
        for pkt, dead in zip(packets, mask)
        if not dead or id(pkt) in exempt
    ]


def corrupt(
    packets,
    pct: float,
    correlation: float,
    rng,
    exempt: set | None = None,
    retransmit: bool = True,
    rto: float = CORRUPT_RTO,
) -> list:
    """Flip one payload byte of selected packets, leaving tcp_sum stale.

    Packets without payload are never selected.  With `retransmit`, a clean
    copy of the damaged segment follows after `rto` seconds.
    """
    mask = _select(len(packets), pct, correlation, rng)
    exempt = exempt or set()
    out = []
    rto_us = int(round(rto * 1_000_000))
    for pkt, hit in zip(packets, mask):
        if not hit or not pkt.data or id(pkt) in exempt:
            out.append(pkt)
            continue
        pos = int(rng.integers(len(pkt.data)))
        data = bytearray(pkt.data)
        data[pos] ^= 0xFF
        out.append(pkt.copy(data=bytes(data)))
        if retransmit:
            out.append(pkt.copy(t_us=pkt.t_us + rto_us))
    return out


def duplicate(packets, pct: float, rng) -> list:
    """Emit selected packets twice, the copy bit-identical and adjacent."""
    mask = _select(len(packets), pct, 0.0, rng)
    out = []
    for pkt, hit in zip(packets, mask):
        out.append(pkt)
        if hit:
            out.append(pkt.copy())
    return out


def reorder(packets, pct: float, gap_delay: float, correlation: float, rng) -> list:
    """Send selected packets gap_delay late; the global re-sort slides them back."""
    mask = _select(len(packets), pct, correlation, rng)
    gap_us = int(round(gap_delay * 1_000_000))
    return [
        pkt.copy(t_us=pkt.t_us + gap_us) if hit else pkt
        for pkt, hit in zip(packets, mask)
    ]


def _refresh_ip_sum(pkt):
    pkt.ip_sum = 0
    frame = encode_frame(pkt)
    ihl = 20 + len(pkt.ip_options)
    pkt.ip_sum = ipv4_checksum(frame[14 : 14 + ihl])
    return pkt


def fragment_packet(pkt, mtu: int) -> list:
    """Split one IPv4 packet into fragments no longer than mtu (IP length)."""
    if pkt.kind == KIND_RAW:
        return [pkt]
    ihl = 20 + len(pkt.ip_options)
    frame = encode_frame(pkt)
    total_len = len(frame) - 14 - len(pkt.trailer)
    if total_len <= mtu:
        return [pkt]
    ip_payload = frame[14 + ihl : 14 + total_len]
    chunk = ((mtu - ihl) // 8) * 8
    if chunk <= 0:
        raise ConfigError("mtu %d leaves no room for fragment data" % mtu)

    thl = pkt.tcp_header_len if pkt.kind == KIND_TCP else 0
    first_is_tcp = pkt.kind == KIND_TCP and chunk >= thl
    frags = []
    pos = 0
    while pos < len(ip_payload):
        piece = ip_payload[pos : pos + chunk]
        last = pos + len(piece) >= len(ip_payload)
        off_units = pkt.ip_off + pos // 8
        common = dict(
            ip_off=off_units,
            ip_mf=(pkt.ip_mf if last else True),
            ip_df=False,
            trailer=b"",
        )
        if pos == 0 and first_is_tcp:
            frag = pkt.copy(data=piece[thl:], **common)
        else:
            frag = pkt.copy(
                kind=KIND_IPV4,
                data=piece,
                tcp_sport=0, tcp_dport=0, tcp_seq=0, tcp_ack=0,
                tcp_off=0, tcp_flags=0, tcp_win=0, tcp_sum=0, tcp_urp=0,
                tcp_options=b"",
                ip_options=(pkt.ip_options if pos == 0 else b""),
                **common,
            )
        _refresh_ip_sum(frag)
        frag.size = 14 + (20 + len(frag.ip_options)) + len(frag.data) + (
            thl if (pos == 0 and first_is_tcp) else 0
        )
        frags.append(frag)
        pos += len(piece)
    return frags


def fragment(packets, mtu: int) -> list:
    if mtu < MIN_MTU:
        raise ConfigError("mtu must be >= %d" % MIN_MTU)
    out = []
    for pkt in packets:
        out.extend(fragment_packet(pkt, mtu))
    return out
