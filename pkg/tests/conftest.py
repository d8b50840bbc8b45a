"""Shared fixtures: a hand-authored pcap (the hex dump is the oracle) and
synthetic connection builders."""

import numpy as np
import pytest

from asnmkit.capture import ACK, FIN, PSH, RST, SYN, Trace, make_tcp_packet, str_to_ip

# Hand-built 3-packet SYN / SYN-ACK / ACK capture, authored byte-by-byte:
# little-endian microsecond pcap, Ethernet/IPv4/TCP, frames of 74, 62 and
# 60 bytes (the last one padded with 6 trailer zeros), 10 ms apart.
HANDSHAKE3_HEX = (
    "d4c3b2a1020004000000000000000000ffff000001000000"
    "0454db48a08601004a0000004a000000"
    "aabbccddee02aabbccddee0108004500003c111140004006a63cc0a8010ac0a80114"
    "9c400050000003e800000000a002faf046e60000"
    "020405b40402080a0001e2400000000001030307"
    "0454db48b0ad01003e0000003e000000"
    "aabbccddee01aabbccddee020800450000302222400040069537c0a80114c0a8010a"
    "00509c4000001388000003e97012fe884e100000"
    "020405b401030306"
    "0454db48c0d401003c0000003c000000"
    "aabbccddee02aabbccddee01080045000028111240004006a64fc0a8010ac0a80114"
    "9c400050000003e900001389501001f6766d0000"
    "000000000000"
)

CLIENT = str_to_ip("192.168.1.10")
SERVER = str_to_ip("192.168.1.20")


@pytest.fixture
def handshake3_bytes():
    return bytes.fromhex(HANDSHAKE3_HEX)


@pytest.fixture
def handshake3_pcap(tmp_path, handshake3_bytes):
    path = tmp_path / "handshake3.pcap"
    path.write_bytes(handshake3_bytes)
    return path


def build_connection(
    t0=0.0,
    client=CLIENT,
    server=SERVER,
    cport=40000,
    sport=80,
    payloads=(),
    close="fin",
    dt=0.01,
):
    """Synthesize one well-formed connection.

    `payloads` is a sequence of (direction, payload_bytes) with direction
    'out' (client to server) or 'in'.  `close` is 'fin', 'rst', or None.
    """
    pkts = []
    t = t0
    cseq, sseq = 1000, 5000

    def emit(outbound, flags, data=b""):
        nonlocal t, cseq, sseq
        if outbound:
            pkt = make_tcp_packet(
                t, client, server, cport, sport, flags,
                seq=cseq, ack=sseq, data=data,
            )
            cseq += len(data) + (1 if flags & (SYN | FIN) else 0)
        else:
            pkt = make_tcp_packet(
                t, server, client, sport, cport, flags,
                seq=sseq, ack=cseq, data=data,
            )
            sseq += len(data) + (1 if flags & (SYN | FIN) else 0)
        pkts.append(pkt)
        t += dt
        return pkt

    emit(True, SYN)
    emit(False, SYN | ACK)
    emit(True, ACK)
    for direction, data in payloads:
        emit(direction == "out", PSH | ACK, data)
    if close == "fin":
        emit(True, FIN | ACK)
        emit(False, FIN | ACK)
        emit(True, ACK)
    elif close == "rst":
        emit(True, RST | ACK)
    return pkts


def rich_trace(seed=7, n_data=40):
    """Two overlapping connections with varied payload sizes, big frames
    included; used by morph and pipeline tests."""
    rng = np.random.default_rng(seed)
    payloads_a = []
    payloads_b = []
    for i in range(n_data):
        direction = "out" if i % 3 else "in"
        size = int(rng.integers(1, 1461))
        payloads_a.append((direction, bytes([i % 251]) * size))
        payloads_b.append((direction, bytes([(i * 7) % 251]) * max(1, size // 2)))
    payloads_a[5] = ("in", b"\xaa" * 1460)  # guarantees a 1514-byte frame
    pkts = build_connection(t0=0.0, payloads=payloads_a, close="fin", dt=0.05)
    pkts += build_connection(
        t0=0.4, cport=40123, sport=445, payloads=payloads_b, close="rst", dt=0.07
    )
    pkts.sort(key=lambda p: p.t_us)
    return pkts


def as_trace(packets):
    return Trace(packets=list(packets), base_ts_us=1_700_000_000_000_000)
