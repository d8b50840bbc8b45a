"""Per-connection feature computations.

All functions are pure; degenerate inputs (empty direction, zero span)
yield sentinel 0 with the family marked invalid instead of NaN/inf.
Inbound means server-to-client, outbound client-to-server.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

import numpy as np

from ..capture import ip_to_str
from ..context import MUTUAL_HORIZON, mutual_flows
from ..flows import CLOSE_ENDSHAKE
from .catalog import (
    DISTRIBUTED_WINDOWS,
    FLAG_NAMES,
    FOURIER_COEFFS,
    FOURIER_N,
    GAUSS_SLICES,
    POLY_DEGREES,
)

_FLAG_BITS = {"Syn": 0x02, "Fin": 0x01, "Rst": 0x04, "Psh": 0x08, "Ack": 0x10, "Urg": 0x20}


@dataclass
class ConnArrays:
    """Connection unpacked into numpy arrays, shared by all feature groups."""

    conn: object
    ctx: object
    out_sizes: np.ndarray
    in_sizes: np.ndarray
    out_rel_us: np.ndarray  # packet times relative to t_s, microseconds
    in_rel_us: np.ndarray
    out_payload: np.ndarray
    in_payload: np.ndarray
    out_flags: np.ndarray
    in_flags: np.ndarray
    all_sizes: np.ndarray       # arrival order, both directions
    all_signed: np.ndarray      # inbound negative, outbound positive
    all_rel_us: np.ndarray
    hdr_lens: np.ndarray
    out_seqs: np.ndarray
    in_seqs: np.ndarray


def build_arrays(conn, ctx) -> ConnArrays:
    ordered = conn.ordered_packets()
    outbound = np.array([conn.is_outbound(p) for p in ordered], dtype=bool)
    sizes = np.array([p.size for p in ordered], dtype=np.float64)
    rel = np.array([p.t_us - conn.t_s_us for p in ordered], dtype=np.int64)
    payload = np.array([len(p.data) for p in ordered], dtype=np.int64)
    flags = np.array([p.tcp_flags for p in ordered], dtype=np.int64)
    hdrs = np.array([p.tcp_header_len for p in ordered], dtype=np.int64)
    seqs = np.array([p.tcp_seq for p in ordered], dtype=np.int64)
    signed = np.where(outbound, sizes, -sizes)
    return ConnArrays(
        conn=conn,
        ctx=ctx,
        out_sizes=sizes[outbound],
        in_sizes=sizes[~outbound],
        out_rel_us=rel[outbound],
        in_rel_us=rel[~outbound],
        out_payload=payload[outbound],
        in_payload=payload[~outbound],
        out_flags=flags[outbound],
        in_flags=flags[~outbound],
        all_sizes=sizes,
        all_signed=signed,
        all_rel_us=rel,
        hdr_lens=hdrs,
        out_seqs=seqs[outbound],
        in_seqs=seqs[~outbound],
    )


def _mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    return float(uniq[np.argmax(counts)])  # ties resolve to the smallest value


def _size_stats(sizes: np.ndarray):
    """(count, sum, mean, median, mode, population std), validity of the moments."""
    n = sizes.size
    if n == 0:
        return (0, 0.0, 0.0, 0.0, 0.0, 0.0), False
    return (
        n,
        float(sizes.sum()),
        float(sizes.mean()),
        float(np.median(sizes)),
        _mode(sizes),
        float(sizes.std()),
    ), True


def statistical_features(arr: ConnArrays):
    out = {}
    stats = {
        "In": _size_stats(arr.in_sizes),
        "Out": _size_stats(arr.out_sizes),
        "All": _size_stats(arr.all_sizes),
    }
    names = ("PktCnt", "PktLenSum", "MeanPktLen", "MedPktLen", "ModPktLen", "SigPktLen")
    for direction, (vals, ok) in stats.items():
        for name, value in zip(names, vals):
            # counts and sums are well-defined even for an empty direction
            valid = ok or name in ("PktCnt", "PktLenSum")
            out[name + direction] = ([value], valid)
    for flag in FLAG_NAMES:
        bit = _FLAG_BITS[flag]
        cnt_in = int(np.count_nonzero(arr.in_flags & bit))
        cnt_out = int(np.count_nonzero(arr.out_flags & bit))
        out["ConTcp%sCntIn" % flag] = ([cnt_in], True)
        out["ConTcp%sCntOut" % flag] = ([cnt_out], True)
        out["%sCntIn" % flag] = ([cnt_in], True)
        out["%sCntOut" % flag] = ([cnt_out], True)
    if arr.hdr_lens.size:
        out["ModTCPHdrLen"] = ([_mode(arr.hdr_lens)], True)
    else:
        out["ModTCPHdrLen"] = ([0.0], False)
    return out


def distributed_features(arr: ConnArrays):
    out = {}
    for window in DISTRIBUTED_WINDOWS:
        t_us = window * 1_000_000
        for direction, sizes, rel in (
            ("In", arr.in_sizes, arr.in_rel_us),
            ("Out", arr.out_sizes, arr.out_rel_us),
        ):
            bins = [0.0] * 10
            inside = (rel >= 0) & (rel < t_us)
            # integer arithmetic keeps bin edges exact
            for k, size in zip(rel[inside] * 10 // t_us, sizes[inside]):
                bins[int(k)] += float(size)
            out["%sPktLen%ds10i" % (direction, window)] = (bins, True)
    out["InPkt1s10i"] = out["InPktLen1s10i"]
    return out


def poly_fit(sizes: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares polynomial fit of sizes against index normalized to [0, 1].

    Coefficients in ascending power order; rank-deficient systems take the
    minimum-norm solution, so a single packet fits as (size, 0, ..., 0).
    """
    n = sizes.size
    x = np.arange(n, dtype=np.float64) / (n - 1) if n > 1 else np.zeros(n)
    design = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(design, sizes, rcond=None)
    return coef


def fourier_series(seq: np.ndarray):
    """Unnormalized forward DFT of the sequence padded/truncated to length 32."""
    if seq.size == 0:
        spectrum = np.zeros(FOURIER_N, dtype=complex)
    else:
        spectrum = np.fft.fft(seq, n=FOURIER_N)
    modulus = np.abs(spectrum)
    angle = np.arctan2(spectrum.imag, spectrum.real)
    return modulus, angle


def gauss_products(sizes: np.ndarray) -> list:
    """Normalized products of packet sizes with 8 Gaussian curves.

    The sequence splits by index into 8 contiguous near-equal slices; slice k
    scores sum(size_i * g(i)) / sum(size_i) with g peaking (value 1) at the
    slice center, sigma = slice length / 4.
    """
    n = sizes.size
    scores = []
    for k in range(GAUSS_SLICES):
        lo = k * n // GAUSS_SLICES
        hi = (k + 1) * n // GAUSS_SLICES
        if hi <= lo:
            scores.append(0.0)
            continue
        idx = np.arange(lo, hi, dtype=np.float64)
        center = (lo + hi - 1) / 2.0
        sigma = (hi - lo) / 4.0
        g = np.exp(-((idx - center) ** 2) / (2.0 * sigma * sigma))
        chunk = sizes[lo:hi]
        denom = chunk.sum()
        scores.append(float((chunk * g).sum() / denom) if denom > 0 else 0.0)
    return scores


def behavioral_features(arr: ConnArrays):
    out = {}
    for degree in POLY_DEGREES:
        for direction, sizes in (("In", arr.in_sizes), ("Out", arr.out_sizes)):
            name = "PolyInd%dord%s" % (degree, direction)
            if sizes.size == 0:
                out[name] = ([0.0] * (degree + 1), False)
            else:
                out[name] = ([float(c) for c in poly_fit(sizes, degree)], True)
    for mode, seq in (
        ("In", arr.in_sizes),
        ("Out", arr.out_sizes),
        ("N", arr.all_signed),
    ):
        modulus, angle = fourier_series(seq)
        out["FourGonModul%s" % mode] = (
            [float(v) for v in modulus[:FOURIER_COEFFS]], True)
        out["FourGonAngle%s" % mode] = (
            [float(v) for v in angle[:FOURIER_COEFFS]], True)
    out["GaussProds8All"] = (gauss_products(arr.all_sizes), True)
    out["GaussProds8Out"] = (gauss_products(arr.out_sizes), True)
    closing = "legal" if arr.conn.closing == CLOSE_ENDSHAKE else "illegal"
    out["ConClosing"] = ([closing], True)
    universe = arr.ctx.universe if arr.ctx is not None else ()
    out["CntOfOldFlows"] = (
        [mutual_flows(universe, arr.conn, MUTUAL_HORIZON, "before")], True)
    out["CntOfNewFlows"] = (
        [mutual_flows(universe, arr.conn, MUTUAL_HORIZON, "after")], True)
    return out


def _throughput(payload: np.ndarray, rel_us: np.ndarray):
    if payload.size == 0:
        return (0.0, False), (0.0, False)
    span_us = int(rel_us[-1] - rel_us[0])
    if span_us > 0:
        mean = (float(payload.sum()) * 1_000_000.0 / span_us, True)
    else:
        mean = (0.0, False)
    # peak: best payload sum over any 1-second window anchored at a packet
    best = 0.0
    j = 0
    running = 0.0
    for i in range(payload.size):
        while j < payload.size and rel_us[j] < rel_us[i] + 1_000_000:
            running += float(payload[j])
            j += 1
        best = max(best, running)
        running -= float(payload[i])
    return mean, (best, True)


def _iat(rel_us: np.ndarray):
    if rel_us.size < 2:
        return (0.0, False), (0.0, False)
    d = np.diff(rel_us) / 1_000_000.0
    return (float(d.mean()), True), (float(d.std()), True)


def dynamic_features(arr: ConnArrays):
    out = {}
    for direction, payload, rel in (
        ("In", arr.in_payload, arr.in_rel_us),
        ("Out", arr.out_payload, arr.out_rel_us),
    ):
        mean, peak = _throughput(payload, rel)
        out["MeanThroughput" + direction] = ([mean[0]], mean[1])
        out["PeakThroughput" + direction] = ([peak[0]], peak[1])
        iat_mean, iat_std = _iat(rel)
        out["MeanIat" + direction] = ([iat_mean[0]], iat_mean[1])
        out["SigIat" + direction] = ([iat_std[0]], iat_std[1])

    retrans = 0
    data_pkts = 0
    for payload, seqs, tag in (
        (arr.out_payload, arr.out_seqs, 0),
        (arr.in_payload, arr.in_seqs, 1),
    ):
        seen = set()
        for has_data, seq in zip(payload > 0, seqs):
            if not has_data:
                continue
            data_pkts += 1
            if (tag, seq) in seen:
                retrans += 1
            seen.add((tag, int(seq)))
    out["RetransCnt"] = ([retrans], True)
    if data_pkts:
        out["RetransRatio"] = ([retrans / data_pkts], True)
    else:
        out["RetransRatio"] = ([0.0], False)
    out["SynRetryCnt"] = ([arr.conn.syn_retries], True)
    if arr.ctx is not None and arr.ctx.tau > 0:
        out["FlowDensity"] = ([len(arr.ctx.members) / arr.ctx.tau], True)
    else:
        out["FlowDensity"] = ([0.0], False)
    return out


def localization_features(arr: ConnArrays, local_prefixes):
    conn = arr.conn
    nets = [ipaddress.ip_network(p, strict=False) for p in local_prefixes]
    addr_c = ipaddress.ip_address(ip_to_str(conn.ip_c))
    addr_s = ipaddress.ip_address(ip_to_str(conn.ip_s))
    client_local = any(addr_c in n for n in nets)
    server_local = any(addr_s in n for n in nets)
    same_subnet = any(addr_c in n and addr_s in n for n in nets)
    out = {
        "ClientIpOct": ([(conn.ip_c >> s) & 0xFF for s in (24, 16, 8, 0)], True),
        "ServerIpOct": ([(conn.ip_s >> s) & 0xFF for s in (24, 16, 8, 0)], True),
        "ClientPort": ([conn.p_c], True),
        "ServerPort": ([conn.p_s], True),
        "ClientLocal": ([int(client_local)], True),
        "ServerLocal": ([int(server_local)], True),
        "SameSubnet": ([int(same_subnet)], True),
    }
    return out


def compute_all(conn, ctx, local_prefixes=()):
    """Every feature family for one connection, as family -> (values, valid)."""
    arr = build_arrays(conn, ctx)
    table = {}
    table.update(statistical_features(arr))
    table.update(dynamic_features(arr))
    table.update(localization_features(arr, local_prefixes))
    table.update(distributed_features(arr))
    table.update(behavioral_features(arr))
    return table
