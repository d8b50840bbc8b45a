"""libpcap decoding and encoding.

Frames are decoded into :class:`Packet` tuples covering Ethernet/IPv4/TCP.
Anything else (ARP, IPv6, UDP payload carriers, truncated records) is kept
verbatim as a raw pass-through packet so that a decoded trace can always be
re-encoded byte-for-byte.  Checksums are stored exactly as read and never
silently repaired.

Decoded packets are rebuilt from their fields on write, so mutating a field
changes exactly the corresponding wire bytes.  Nanosecond captures are
down-converted to microseconds (truncation toward zero).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from .errors import PcapFormatError, TruncatedCaptureError

MAGIC_US = 0xA1B2C3D4
MAGIC_NS = 0xA1B23C4D

ETH_HLEN = 14
ETHERTYPE_IPV4 = 0x0800

# tcp_flags bits
FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20

# decode levels
KIND_RAW = "raw"    # undecodable frame, bytes preserved in .raw
KIND_IPV4 = "ipv4"  # Ethernet + IPv4 decoded, payload opaque (non-TCP or fragment tail)
KIND_TCP = "tcp"    # full Ethernet/IPv4/TCP decode


@dataclass
class Packet:
    """One captured frame.

    `t_us` is the capture time in whole microseconds relative to the first
    packet of the trace; `size` is the full frame length on the wire.  The
    remaining names follow the usual header fields.  `ip_off` is the 13-bit
    fragment offset in 8-octet units with the flag bits carried separately.
    """

    t_us: int = 0
    size: int = 0
    eth_src: int = 0
    eth_dst: int = 0
    ip_off: int = 0
    ip_mf: bool = False
    ip_ttl: int = 0
    ip_p: int = 0
    ip_sum: int = 0
    ip_src: int = 0
    ip_dst: int = 0
    ip_dscp: int = 0
    tcp_sport: int = 0
    tcp_dport: int = 0
    tcp_sum: int = 0
    tcp_seq: int = 0
    tcp_ack: int = 0
    tcp_off: int = 0
    tcp_flags: int = 0
    tcp_win: int = 0
    tcp_urp: int = 0
    data: bytes = b""
    # encoding state, not part of the connection model
    kind: str = KIND_RAW
    raw: bytes = b""
    eth_type: int = ETHERTYPE_IPV4
    ip_id: int = 0
    ip_df: bool = False
    ip_rf: bool = False
    ip_options: bytes = b""
    tcp_options: bytes = b""
    trailer: bytes = b""

    @property
    def t(self) -> float:
        """Relative capture time in seconds."""
        return self.t_us / 1_000_000.0

    @property
    def is_tcp(self) -> bool:
        return self.kind == KIND_TCP

    @property
    def tcp_header_len(self) -> int:
        return (self.tcp_off >> 4) * 4

    def flag(self, bit: int) -> bool:
        return bool(self.tcp_flags & bit)

    def copy(self, **changes) -> "Packet":
        return replace(self, **changes)


@dataclass
class Trace:
    """Ordered packet sequence plus the file-level state needed to re-encode it."""

    packets: list = field(default_factory=list)
    base_ts_us: int = 0
    nanos: bool = False
    swapped: bool = False
    snaplen: int = 65535
    linktype: int = 1

    def __len__(self):
        return len(self.packets)

    def __iter__(self):
        return iter(self.packets)

    def __getitem__(self, i):
        return self.packets[i]


def ipv4_checksum(header: bytes) -> int:
    """RFC 1071 ones-complement sum over `header` (checksum field zeroed by caller)."""
    if len(header) % 2:
        header = header + b"\x00"
    total = sum(struct.unpack(">%dH" % (len(header) // 2), header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def tcp_checksum(ip_src: int, ip_dst: int, segment: bytes) -> int:
    """TCP checksum over the IPv4 pseudo-header plus the full segment."""
    pseudo = struct.pack(">IIBBH", ip_src, ip_dst, 0, 6, len(segment))
    return ipv4_checksum(pseudo + segment)


def _decode_frame(buf: bytes, t_us: int, size: int) -> Packet:
    pkt = Packet(t_us=t_us, size=size, raw=buf, kind=KIND_RAW)
    if len(buf) < ETH_HLEN:
        return pkt
    eth_dst = int.from_bytes(buf[0:6], "big")
    eth_src = int.from_bytes(buf[6:12], "big")
    eth_type = struct.unpack(">H", buf[12:14])[0]
    if eth_type != ETHERTYPE_IPV4 or len(buf) < ETH_HLEN + 20:
        return pkt

    ip = buf[ETH_HLEN:]
    ver_ihl = ip[0]
    if ver_ihl >> 4 != 4:
        return pkt
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or len(ip) < ihl:
        return pkt
    total_len = struct.unpack(">H", ip[2:4])[0]
    if total_len < ihl or len(ip) < total_len:
        return pkt
    flags_off = struct.unpack(">H", ip[6:8])[0]

    pkt.kind = KIND_IPV4
    pkt.raw = b""
    pkt.eth_dst = eth_dst
    pkt.eth_src = eth_src
    pkt.eth_type = eth_type
    pkt.ip_dscp = ip[1]
    pkt.ip_id = struct.unpack(">H", ip[4:6])[0]
    pkt.ip_rf = bool(flags_off & 0x8000)
    pkt.ip_df = bool(flags_off & 0x4000)
    pkt.ip_mf = bool(flags_off & 0x2000)
    pkt.ip_off = flags_off & 0x1FFF
    pkt.ip_ttl = ip[8]
    pkt.ip_p = ip[9]
    pkt.ip_sum = struct.unpack(">H", ip[10:12])[0]
    pkt.ip_src = struct.unpack(">I", ip[12:16])[0]
    pkt.ip_dst = struct.unpack(">I", ip[16:20])[0]
    pkt.ip_options = bytes(ip[20:ihl])
    pkt.trailer = bytes(ip[total_len:])

    payload = ip[ihl:total_len]
    if pkt.ip_p != 6 or pkt.ip_off != 0:
        # non-TCP datagram or a fragment tail: no transport header to parse
        pkt.data = bytes(payload)
        return pkt
    if len(payload) < 20:
        pkt.data = bytes(payload)
        return pkt
    tcp_off = payload[12]
    thl = (tcp_off >> 4) * 4
    if thl < 20 or len(payload) < thl:
        pkt.data = bytes(payload)
        return pkt

    pkt.kind = KIND_TCP
    pkt.tcp_sport, pkt.tcp_dport = struct.unpack(">HH", payload[0:4])
    pkt.tcp_seq, pkt.tcp_ack = struct.unpack(">II", payload[4:12])
    pkt.tcp_off = tcp_off
    pkt.tcp_flags = payload[13]
    pkt.tcp_win = struct.unpack(">H", payload[14:16])[0]
    pkt.tcp_sum = struct.unpack(">H", payload[16:18])[0]
    pkt.tcp_urp = struct.unpack(">H", payload[18:20])[0]
    pkt.tcp_options = bytes(payload[20:thl])
    pkt.data = bytes(payload[thl:])
    return pkt


def encode_frame(pkt: Packet) -> bytes:
    """Rebuild the wire bytes of a packet from its fields."""
    if pkt.kind == KIND_RAW:
        return pkt.raw
    eth = pkt.eth_dst.to_bytes(6, "big") + pkt.eth_src.to_bytes(6, "big")
    eth += struct.pack(">H", pkt.eth_type)

    if pkt.kind == KIND_TCP:
        thl = 20 + len(pkt.tcp_options)
        tcp = struct.pack(
            ">HHIIBBHHH",
            pkt.tcp_sport,
            pkt.tcp_dport,
            pkt.tcp_seq,
            pkt.tcp_ack,
            pkt.tcp_off,
            pkt.tcp_flags,
            pkt.tcp_win,
            pkt.tcp_sum,
            pkt.tcp_urp,
        )
        ip_payload = tcp + pkt.tcp_options + pkt.data
        assert len(tcp) + len(pkt.tcp_options) == thl
    else:
        ip_payload = pkt.data

    ihl = 20 + len(pkt.ip_options)
    total_len = ihl + len(ip_payload)
    flags_off = (
        (0x8000 if pkt.ip_rf else 0)
        | (0x4000 if pkt.ip_df else 0)
        | (0x2000 if pkt.ip_mf else 0)
        | (pkt.ip_off & 0x1FFF)
    )
    ip = struct.pack(
        ">BBHHHBBHII",
        0x40 | (ihl // 4),
        pkt.ip_dscp,
        total_len,
        pkt.ip_id,
        flags_off,
        pkt.ip_ttl,
        pkt.ip_p,
        pkt.ip_sum,
        pkt.ip_src,
        pkt.ip_dst,
    )
    return eth + ip + pkt.ip_options + ip_payload + pkt.trailer


def make_tcp_packet(
    t: float,
    ip_src: int,
    ip_dst: int,
    sport: int,
    dport: int,
    flags: int,
    seq: int = 0,
    ack: int = 0,
    data: bytes = b"",
    ttl: int = 64,
    win: int = 65535,
    ip_id: int = 0,
    eth_src: int = 0x02_00_00_00_00_01,
    eth_dst: int = 0x02_00_00_00_00_02,
) -> Packet:
    """Synthesize a checksummed Ethernet/IPv4/TCP packet (used by morphing and tests)."""
    pkt = Packet(
        t_us=int(round(t * 1_000_000)),
        kind=KIND_TCP,
        eth_src=eth_src,
        eth_dst=eth_dst,
        ip_ttl=ttl,
        ip_p=6,
        ip_src=ip_src,
        ip_dst=ip_dst,
        ip_id=ip_id,
        ip_df=True,
        tcp_sport=sport,
        tcp_dport=dport,
        tcp_seq=seq,
        tcp_ack=ack,
        tcp_off=5 << 4,
        tcp_flags=flags,
        tcp_win=win,
        data=data,
    )
    ip_header = struct.pack(
        ">BBHHHBBHII",
        0x45,
        0,
        20 + 20 + len(data),
        ip_id,
        0x4000,
        ttl,
        6,
        0,
        ip_src,
        ip_dst,
    )
    pkt.ip_sum = ipv4_checksum(ip_header)
    segment = struct.pack(
        ">HHIIBBHHH", sport, dport, seq, ack, 5 << 4, flags, win, 0, 0
    ) + data
    pkt.tcp_sum = tcp_checksum(ip_src, ip_dst, segment)
    pkt.size = ETH_HLEN + 20 + 20 + len(data)
    return pkt


def read_pcap(path) -> Trace:
    """Decode a libpcap file into a Trace of Packets in file order.

    Raises PcapFormatError on a bad global header and TruncatedCaptureError
    (carrying the partial trace) when the file ends inside a record.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24:
        raise PcapFormatError("file shorter than a pcap global header")
    magic_be = struct.unpack(">I", blob[:4])[0]
    magic_le = struct.unpack("<I", blob[:4])[0]
    if magic_be in (MAGIC_US, MAGIC_NS):
        order, nanos, swapped = ">", magic_be == MAGIC_NS, False
    elif magic_le in (MAGIC_US, MAGIC_NS):
        order, nanos, swapped = "<", magic_le == MAGIC_NS, True
    else:
        raise PcapFormatError("unrecognized pcap magic 0x%08x" % magic_be)
    _vmaj, _vmin, _zone, _sig, snaplen, linktype = struct.unpack(
        order + "HHiIII", blob[4:24]
    )

    trace = Trace(nanos=nanos, swapped=swapped, snaplen=snaplen, linktype=linktype)
    pos = 24
    first = True
    rec_hdr = struct.Struct(order + "IIII")
    while pos < len(blob):
        if pos + 16 > len(blob):
            raise TruncatedCaptureError(
                "truncated record header at byte %d" % pos, trace
            )
        ts_sec, ts_frac, incl_len, orig_len = rec_hdr.unpack_from(blob, pos)
        pos += 16
        if pos + incl_len > len(blob):
            raise TruncatedCaptureError(
                "record at byte %d claims %d bytes past end of file"
                % (pos - 16, incl_len),
                trace,
            )
        frame = blob[pos : pos + incl_len]
        pos += incl_len
        frac_us = ts_frac // 1000 if nanos else ts_frac
        abs_us = ts_sec * 1_000_000 + frac_us
        if first:
            trace.base_ts_us = abs_us
            first = False
        t_us = abs_us - trace.base_ts_us
        if linktype == 1 and incl_len == orig_len:
            pkt = _decode_frame(frame, t_us, orig_len)
        else:
            pkt = Packet(t_us=t_us, size=orig_len, raw=frame, kind=KIND_RAW)
        trace.packets.append(pkt)
    return trace


def write_pcap(
    packets,
    path,
    *,
    base_ts_us: int | None = None,
    nanos: bool | None = None,
    swapped: bool | None = None,
    snaplen: int | None = None,
    linktype: int | None = None,
) -> None:
    """Encode packets back to a libpcap file.

    When `packets` is a Trace, its header metadata is reused so that
    write(read(f)) reproduces f byte-for-byte.
    """
    meta = packets if isinstance(packets, Trace) else None
    base_ts_us = base_ts_us if base_ts_us is not None else (meta.base_ts_us if meta else 0)
    nanos = nanos if nanos is not None else (meta.nanos if meta else False)
    swapped = swapped if swapped is not None else (meta.swapped if meta else False)
    snaplen = snaplen if snaplen is not None else (meta.snaplen if meta else 65535)
    linktype = linktype if linktype is not None else (meta.linktype if meta else 1)

    order = "<" if swapped else ">"
    magic = MAGIC_NS if nanos else MAGIC_US
    out = [struct.pack(order + "IHHiIII", magic, 2, 4, 0, 0, snaplen, linktype)]
    for pkt in packets:
        frame = encode_frame(pkt)
        abs_us = base_ts_us + pkt.t_us
        sec, frac_us = divmod(abs_us, 1_000_000)
        frac = frac_us * 1000 if nanos else frac_us
        if pkt.kind == KIND_RAW:
            incl, orig = len(frame), pkt.size if pkt.size else len(frame)
        else:
            incl = orig = len(frame)
        out.append(struct.pack(order + "IIII", sec, frac, incl, orig))
        out.append(frame)
    data = b"".join(out)
    with open(path, "wb") as fh:
        fh.write(data)


def ip_to_str(ip: int) -> str:
    return ".".join(str((ip >> s) & 0xFF) for s in (24, 16, 8, 0))


def str_to_ip(s: str) -> int:
    parts = [int(x) for x in s.split(".")]
    if len(parts) != 4 or any(not 0 <= p <= 255 for p in parts):
        raise ValueError("bad IPv4 address %r" % s)
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]
