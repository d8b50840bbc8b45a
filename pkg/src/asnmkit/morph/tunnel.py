"""Tunneling obfuscation: each original IP packet rides as one
length-prefixed record in the payload stream of a fresh carrier TCP
connection with new addresses and ports.

http mode prepends a fixed textual header to every record; https mode uses
a 5-byte TLS-style record frame and scrambles record bodies with a seeded
keystream so the carrier payload is opaque.  Records are cut into carrier
segments no longer than the MSS, so large originals fragment across
several segments.  `detunnel` inverts the transform (https needs the same
seed).
"""

from __future__ import annotations

import struct

import numpy as np

from ..capture import ACK, FIN, PSH, SYN, encode_frame, make_tcp_packet
from ..errors import ConfigError
from ..flows import assemble_connections

MSS = 1460
HTTP_RECORD_HEADER = b"POST /relay HTTP/1.1\r\n"
TLS_RECORD_TYPE = 0x17
TLS_VERSION = 0x0303
STEP_US = 100  # carrier handshake/endshake pacing

CARRIER_ETH_C = 0x02_AA_00_00_00_01
CARRIER_ETH_S = 0x02_AA_00_00_00_02


def _keystream(seed: int, length: int) -> bytes:
    return np.random.Generator(np.random.PCG64(seed)).bytes(length)


def _frame_record(body: bytes, mode: str, key_seed: int | None) -> bytes:
    if mode == "http":
        return HTTP_RECORD_HEADER + struct.pack(">I", len(body)) + body
    if mode == "https":
        if len(body) > 0xFFFF:
            raise ConfigError("record too long for https framing")
        scrambled = bytes(
            a ^ b for a, b in zip(body, _keystream(key_seed, len(body)))
        )
        return struct.pack(">BHH", TLS_RECORD_TYPE, TLS_VERSION, len(body)) + scrambled
    raise ConfigError("tunnel mode must be http or https")


class _Carrier:
    """Sequence/ack bookkeeping for one synthetic carrier connection."""

    def __init__(self, endpoints, rng, base_t_us):
        self.ip_c, self.p_c, self.ip_s, self.p_s = endpoints
        self.seq_c = int(rng.integers(1, 2**32 - 1))
        self.seq_s = int(rng.integers(1, 2**32 - 1))
        self.ip_id = int(rng.integers(1, 0xF000))
        self.packets = []
        self.t_us = base_t_us

    def _emit(self, outbound, t_us, flags, data=b""):
        if outbound:
            src, dst = (self.ip_c, self.p_c), (self.ip_s, self.p_s)
            seq, ack = self.seq_c, self.seq_s
            eth = (CARRIER_ETH_C, CARRIER_ETH_S)
        else:
            src, dst = (self.ip_s, self.p_s), (self.ip_c, self.p_c)
            seq, ack = self.seq_s, self.seq_c
            eth = (CARRIER_ETH_S, CARRIER_ETH_C)
        self.ip_id = (self.ip_id + 1) & 0xFFFF
        pkt = make_tcp_packet(
            t=0.0,
            ip_src=src[0], ip_dst=dst[0], sport=src[1], dport=dst[1],
            flags=flags, seq=seq, ack=(ack if flags & ACK else 0),
            data=data, ip_id=self.ip_id,
            eth_src=eth[0], eth_dst=eth[1],
        )
        pkt.t_us = t_us
        consumed = len(data) + (1 if flags & (SYN | FIN) else 0)
        if outbound:
            self.seq_c = (self.seq_c + consumed) & 0xFFFFFFFF
        else:
            self.seq_s = (self.seq_s + consumed) & 0xFFFFFFFF
        self.packets.append(pkt)

    def handshake(self):
        t = self.t_us
        self._emit(True, t, SYN)
        self._emit(False, t + STEP_US, SYN | ACK)
        self._emit(True, t + 2 * STEP_US, ACK)

    def send_stream(self, outbound, t_us, payload):
        for lo in range(0, len(payload), MSS):
            self._emit(outbound, t_us, PSH | ACK, payload[lo : lo + MSS])

    def endshake(self, t_us):
        self._emit(True, t_us, FIN | ACK)
        self._emit(False, t_us + STEP_US, FIN | ACK)
        self._emit(True, t_us + 2 * STEP_US, ACK)


def tunnel_connection(conn_packets, mode, endpoints, rng, key_seed=None):
    """Wrap one connection's packets into a new carrier connection.

    `conn_packets` must be that connection's packets in time order with a
    known client side: a packet is outbound when it matches the first
    packet's source.  Returns the carrier packet list in time order.
    """
    base = conn_packets[0].t_us if conn_packets else 0
    carrier = _Carrier(endpoints, rng, base)
    carrier.handshake()
    last = base
    for pkt in conn_packets:
        outbound = (pkt.ip_src, pkt.tcp_sport) == (
            conn_packets[0].ip_src,
            conn_packets[0].tcp_sport,
        )
        body = encode_frame(pkt)[14:]
        if pkt.trailer:
            body = body[: len(body) - len(pkt.trailer)]
        record = _frame_record(body, mode, key_seed)
        t = pkt.t_us + 3 * STEP_US
        carrier.send_stream(outbound, t, record)
        last = max(last, t)
    carrier.endshake(last + 4 * STEP_US)
    return carrier.packets


def tunnel_trace(packets, mode, seed, flow_timeout=600.0, endpoints=None):
    """Tunnel every assembled connection of a trace; other packets pass through."""
    rng = np.random.Generator(np.random.PCG64(seed))
    conns, residue = assemble_connections(packets, timeout=flow_timeout)
    out = list(residue)
    out.extend(p for p in packets if not p.is_tcp)
    for idx, conn in enumerate(conns):
        if endpoints is None:
            eps = (
                0x0AC80000 | int(rng.integers(1, 0xFFFE)),
                49152 + int(rng.integers(0, 16384)),
                0x0AC90000 | int(rng.integers(1, 0xFFFE)),
                80 if mode == "http" else 443,
            )
        else:
            eps = endpoints
        key_seed = None if mode == "http" else (seed << 16) ^ idx
        out.extend(
            tunnel_connection(conn.ordered_packets(), mode, eps, rng, key_seed)
        )
    out.sort(key=lambda p: p.t_us)
    return out


def _split_records(stream: bytes, mode: str, key_seed):
    """Parse a carrier payload stream back into record bodies with offsets."""
    bodies = []
    pos = 0
    while pos < len(stream):
        if mode == "http":
            hdr = len(HTTP_RECORD_HEADER)
            if stream[pos : pos + hdr] != HTTP_RECORD_HEADER:
                raise ConfigError("carrier stream lost http record sync at %d" % pos)
            (length,) = struct.unpack_from(">I", stream, pos + hdr)
            body = stream[pos + hdr + 4 : pos + hdr + 4 + length]
            record_len = hdr + 4 + length
        else:
            rtype, _ver, length = struct.unpack_from(">BHH", stream, pos)
            if rtype != TLS_RECORD_TYPE:
                raise ConfigError("carrier stream lost https record sync at %d" % pos)
            raw = stream[pos + 5 : pos + 5 + length]
            body = bytes(a ^ b for a, b in zip(raw, _keystream(key_seed, length)))
            record_len = 5 + length
        if len(body) != length:
            raise ConfigError("carrier stream ends inside a record")
        bodies.append((pos, body))
        pos += record_len
    return bodies


def detunnel(packets, mode, seed=None, flow_timeout=600.0):
    """Recover the original IP datagrams from a tunneled trace.

    Returns a time-ordered list of (t_us, ip_bytes).  https mode needs the
    seed the tunnel ran with.
    """
    conns, _ = assemble_connections(packets, timeout=flow_timeout)
    recovered = []
    for idx, conn in enumerate(conns):
        key_seed = None if mode == "http" else (seed << 16) ^ idx
        for side in (conn.P_c, conn.P_s):
            stream = b"".join(p.data for p in side)
            offsets = []  # (stream_offset, t_us) per segment
            pos = 0
            for p in side:
                if p.data:
                    offsets.append((pos, p.t_us))
                    pos += len(p.data)
            for rec_off, body in _split_records(stream, mode, key_seed):
                t_us = max(t for off, t in offsets if off <= rec_off)
                recovered.append((t_us - 3 * STEP_US, body))
    recovered.sort(key=lambda item: item[0])
    return recovered
