"""End-to-end rehearsal of the replication path on synthetic data.

Builds traces, morphs attack connections, extracts features, writes a
dataset CSV, loads it back through the published-dataset loader, and runs
the evasion/augmentation experiments with the built-in feature subsets.
This validates every code path criteria 1-4 use; the published numbers
themselves still require the published files.
"""

import numpy as np
import pytest

from asnmkit.bench import (
    augmentation_experiment,
    builtin_subset,
    cv_experiment,
    evasion_experiment,
)
from asnmkit.context import sliding_window
from asnmkit.dataset_io import LabelSet, attach_labels, load_dataset, write_csv
from asnmkit.features import default_catalog, extract
from asnmkit.flows import assemble_connections
from asnmkit.morph import ObfuscationSpec, apply

from conftest import build_connection

CATALOG = default_catalog()


def test_builtin_subsets_are_extractable():
    columns = set(CATALOG.column_ids())
    for name in ("cdx-nb", "tun-dl", "tun-dol", "npbo-dl", "npbo-dol"):
        missing = [c for c in builtin_subset(name) if c not in columns]
        assert not missing, (name, missing)


def _synth_rows(seed=0):
    rng = np.random.default_rng(seed)
    rows = []

    def harvest(packets, labels):
        conns, _ = assemble_connections(sorted(packets, key=lambda p: p.t_us))
        for conn in conns:
            ctx = sliding_window(conns, conn, 300.0)
            fv = extract(conn, ctx, CATALOG)
            rows.append(fv)
            attach_labels([fv], labels,
                          schemas=("label_2", "label_3", "label_poly"))

    # legitimate traffic: short chatty exchanges
    for i in range(24):
        payloads = [
            ("out" if j % 2 else "in", b"l" * int(rng.integers(40, 400)))
            for j in range(int(rng.integers(2, 8)))
        ]
        pkts = build_connection(
            t0=float(i), cport=41000 + i, payloads=payloads, dt=0.004
        )
        harvest(pkts, LabelSet(label_3=3, service="apache"))

    # direct attacks: long inbound-heavy transfers
    attack_payloads = lambda: [
        ("in", b"a" * int(rng.integers(1200, 1461))) for _ in range(10)
    ] + [("out", b"c" * 30)]
    direct_traces = []
    for i in range(10):
        pkts = build_connection(
            t0=100.0 + i, cport=42000 + i, payloads=attack_payloads(), dt=0.02
        )
        direct_traces.append(pkts)
        harvest(pkts, LabelSet(label_3=1, service="apache"))

    # obfuscated attacks: the same attacks run through morph presets
    for i, preset in enumerate(("a", "d", "h", "k", "q", "tunnel-http")):
        base = direct_traces[i % len(direct_traces)]
        shifted = [p.copy(t_us=p.t_us + int(200e6) + int(i * 3e6)) for p in base]
        morphed = apply(shifted, ObfuscationSpec(preset, seed=40 + i))
        harvest(morphed, LabelSet(label_3=2, service="apache", modifier=preset[0]))
    return rows


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    rows = _synth_rows()
    path = tmp_path_factory.mktemp("data") / "ASNM-TUN-rehearsal.csv"
    write_csv(rows, path)
    return path.parent, len(rows)


def test_full_replication_path(dataset_dir, monkeypatch):
    data_dir, n_rows = dataset_dir
    monkeypatch.setenv("ASNM_DATA_DIR", str(data_dir))
    rows = load_dataset("tun")
    assert len(rows) == n_rows

    dl = builtin_subset("tun-dl")
    dol = builtin_subset("tun-dol")

    evasion = evasion_experiment(rows, dl, classifier="nb", k=5, seed=0)
    assert evasion.n_obfuscated == 6
    assert 0.0 <= evasion.obfuscated_tpr <= 1.0

    augmented = augmentation_experiment(
        rows, dol, classifier="nb", k=5, seed=0,
        baseline=(evasion.all_attacks_tpr, evasion.cv_report.fpr),
    )
    assert augmented.report.matrix.sum() == n_rows
    assert augmented.delta_tpr is not None

    tree_report = cv_experiment(rows, dol, classifier="tree", k=5, seed=0)
    assert tree_report.matrix.sum() == n_rows


def test_replication_path_deterministic(dataset_dir, monkeypatch):
    data_dir, _ = dataset_dir
    monkeypatch.setenv("ASNM_DATA_DIR", str(data_dir))
    rows = load_dataset("tun")
    dl = builtin_subset("tun-dl")
    a = evasion_experiment(rows, dl, classifier="nb", k=5, seed=9)
    b = evasion_experiment(rows, dl, classifier="nb", k=5, seed=9)
    assert np.array_equal(a.cv_report.matrix, b.cv_report.matrix)
    assert a.obfuscated_tpr == b.obfuscated_tpr
