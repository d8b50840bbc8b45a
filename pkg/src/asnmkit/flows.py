"""TCP connection assembly from time-ordered packet sequences.

A connection opens on a matched three-way handshake (SYN seq=x, SYN-ACK
ack=x+1 seq=y, ACK ack=y+1; the SYN sender is the client) and closes on a
completed FIN exchange, an RST, or an inactivity timeout.  A completed
bidirectional FIN exchange (three- or four-way) counts as the legal
endshake; RST and timeout closures are recorded so the behavioral
closing feature can tell them apart.  TCP packets that never belong to a
handshaken connection end up in the residue, non-TCP frames are ignored
here entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .capture import ACK, FIN, RST, SYN, ip_to_str
from .errors import DomainError

CLOSE_ENDSHAKE = "endshake"
CLOSE_RST = "rst"
CLOSE_TIMEOUT = "timeout"

DEFAULT_TIMEOUT = 600.0


@dataclass(eq=False)  # identity semantics: two connections are never "the same"
class TcpConnection:
    """The 8-field connection tuple plus assembly metadata."""

    ip_c: int
    p_c: int
    ip_s: int
    p_s: int
    t_s_us: int
    t_e_us: int
    P_c: list = field(default_factory=list)
    P_s: list = field(default_factory=list)
    closing: str = CLOSE_TIMEOUT
    syn_retries: int = 0
    _ordered: list = field(default_factory=list)  # arrival-ordered P_c ∪ P_s

    @property
    def t_s(self) -> float:
        return self.t_s_us / 1_000_000.0

    @property
    def t_e(self) -> float:
        return self.t_e_us / 1_000_000.0

    @property
    def conn_id(self) -> str:
        return "%s:%d-%s:%d@%.6f" % (
            ip_to_str(self.ip_c),
            self.p_c,
            ip_to_str(self.ip_s),
            self.p_s,
            self.t_s,
        )

    def ordered_packets(self) -> list:
        return self._ordered

    def is_outbound(self, pkt) -> bool:
        return (pkt.ip_src, pkt.tcp_sport) == (self.ip_c, self.p_c)


def direction_of(conn: TcpConnection, pkt) -> str:
    """Classify a connection packet as 'outbound' (client→server) or 'inbound'."""
    if (pkt.ip_src, pkt.tcp_sport) == (conn.ip_c, conn.p_c) and (
        pkt.ip_dst,
        pkt.tcp_dport,
    ) == (conn.ip_s, conn.p_s):
        return "outbound"
    if (pkt.ip_src, pkt.tcp_sport) == (conn.ip_s, conn.p_s) and (
        pkt.ip_dst,
        pkt.tcp_dport,
    ) == (conn.ip_c, conn.p_c):
        return "inbound"
    raise DomainError("packet does not belong to connection %s" % conn.conn_id)


def _pair_key(pkt):
    a = (pkt.ip_src, pkt.tcp_sport)
    b = (pkt.ip_dst, pkt.tcp_dport)
    return (a, b) if a <= b else (b, a)


class _Pending:
    """Handshake in progress for one 4-tuple."""

    __slots__ = ("client", "server", "syn_seq", "synack_seq", "state", "packets",
                 "retries", "last_t_us", "t_syn_us")

    def __init__(self, pkt):
        self.client = (pkt.ip_src, pkt.tcp_sport)
        self.server = (pkt.ip_dst, pkt.tcp_dport)
        self.syn_seq = pkt.tcp_seq
        self.synack_seq = 0
        self.state = 1  # 1 = SYN seen, 2 = SYN-ACK seen
        self.packets = [pkt]
        self.retries = 0
        self.last_t_us = pkt.t_us
        self.t_syn_us = pkt.t_us


class _Live:
    """Established connection accumulating packets until it closes."""

    __slots__ = ("conn", "fin_c_seq", "fin_s_seq", "fin_c_acked", "fin_s_acked",
                 "last_t_us")

    def __init__(self, pending: _Pending):
        ip_c, p_c = pending.client
        ip_s, p_s = pending.server
        self.conn = TcpConnection(
            ip_c=ip_c, p_c=p_c, ip_s=ip_s, p_s=p_s,
            t_s_us=pending.t_syn_us, t_e_us=pending.t_syn_us,
            syn_retries=pending.retries,
        )
        self.fin_c_seq = None
        self.fin_s_seq = None
        self.fin_c_acked = False
        self.fin_s_acked = False
        self.last_t_us = pending.t_syn_us
        for pkt in pending.packets:
            self.add(pkt)

    def add(self, pkt):
        conn = self.conn
        outbound = conn.is_outbound(pkt)
        (conn.P_c if outbound else conn.P_s).append(pkt)
        conn._ordered.append(pkt)
        self.last_t_us = pkt.t_us
        if pkt.flag(FIN):
            fin_end = pkt.tcp_seq + len(pkt.data)
            if outbound:
                self.fin_c_seq = fin_end
            else:
                self.fin_s_seq = fin_end
        if pkt.flag(ACK):
            if outbound and self.fin_s_seq is not None and pkt.tcp_ack >= self.fin_s_seq + 1:
                self.fin_s_acked = True
            if not outbound and self.fin_c_seq is not None and pkt.tcp_ack >= self.fin_c_seq + 1:
                self.fin_c_acked = True

    def endshake_done(self) -> bool:
        return self.fin_c_acked and self.fin_s_acked

    def close(self, closing: str, t_e_us: int) -> TcpConnection:
        self.conn.closing = closing
        self.conn.t_e_us = t_e_us
        return self.conn


def assemble_connections(packets, timeout: float = DEFAULT_TIMEOUT):
    """Partition time-ordered packets into handshaken connections and residue.

    Returns (connections, residue); connections are ordered by start time,
    residue keeps input order.  Only TCP packets participate.
    """
    if timeout <= 0:
        raise DomainError("timeout must be positive")
    timeout_us = int(round(timeout * 1_000_000))

    conns: list[TcpConnection] = []
    residue: list = []
    pending: dict = {}
    live: dict = {}

    def expire(key, now_us):
        if key in live:
            st = live[key]
            if now_us - st.last_t_us > timeout_us:
                conns.append(st.close(CLOSE_TIMEOUT, st.last_t_us))
                del live[key]
        if key in pending:
            pd = pending[key]
            if now_us - pd.last_t_us > timeout_us:
                residue.extend(pd.packets)
                del pending[key]

    for pkt in packets:
        if not pkt.is_tcp:
            continue
        key = _pair_key(pkt)
        expire(key, pkt.t_us)

        if key in live:
            st = live[key]
            st.add(pkt)
            if pkt.flag(RST):
                conns.append(st.close(CLOSE_RST, pkt.t_us))
                del live[key]
            elif st.endshake_done():
                conns.append(st.close(CLOSE_ENDSHAKE, pkt.t_us))
                del live[key]
            continue

        if key in pending:
            pd = pending[key]
            pd.last_t_us = pkt.t_us
            src = (pkt.ip_src, pkt.tcp_sport)
            if pkt.flag(RST):
                residue.extend(pd.packets)
                residue.append(pkt)
                del pending[key]
            elif pkt.flag(SYN) and not pkt.flag(ACK) and src == pd.client:
                if pkt.tcp_seq == pd.syn_seq:
                    # retransmitted SYN extends the same attempt
                    pd.retries += 1
                    pd.packets.append(pkt)
                else:
                    residue.extend(pd.packets)
                    pending[key] = _Pending(pkt)
            elif (
                pd.state == 1
                and pkt.flag(SYN)
                and pkt.flag(ACK)
                and src == pd.server
                and pkt.tcp_ack == (pd.syn_seq + 1) & 0xFFFFFFFF
            ):
                pd.synack_seq = pkt.tcp_seq
                pd.state = 2
                pd.packets.append(pkt)
            elif (
                pd.state == 2
                and not pkt.flag(SYN)
                and pkt.flag(ACK)
                and src == pd.client
                and pkt.tcp_ack == (pd.synack_seq + 1) & 0xFFFFFFFF
            ):
                pd.packets.append(pkt)
                live[key] = _Live(pd)
                del pending[key]
            else:
                pd.packets.append(pkt)
            continue

        if pkt.flag(SYN) and not pkt.flag(ACK) and not pkt.flag(RST):
            pending[key] = _Pending(pkt)
        else:
            residue.append(pkt)

    for st in live.values():
        conns.append(st.close(CLOSE_TIMEOUT, st.last_t_us))
    for pd in pending.values():
        residue.extend(pd.packets)

    conns.sort(key=lambda c: c.t_s_us)
    return conns, residue
