import os

import pytest

from asnmkit.cli import main
from asnmkit.dataset_io import read_csv, write_csv

from conftest import as_trace, rich_trace
from asnmkit.capture import write_pcap


@pytest.fixture
def rich_pcap(tmp_path):
    path = tmp_path / "rich.pcap"
    write_pcap(as_trace(rich_trace()), path)
    return path


def test_no_subcommand_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_usage_error():
    assert main(["extract", "--bogus"]) == 2


def test_extract_fixture_single_row(handshake3_pcap, tmp_path, capsys):
    out = tmp_path / "features.csv"
    assert main(["extract", str(handshake3_pcap), "-o", str(out), "--jobs", "1"]) == 0
    rows = read_csv(out)
    assert len(rows) == 1
    assert rows[0].values["PktCntAll"] == 3


def test_extract_missing_file_is_domain_error(tmp_path):
    assert main(["extract", str(tmp_path / "no.pcap"), "-o", str(tmp_path / "x.csv")]) == 1


def test_extract_jobs_parallel_deterministic(rich_pcap, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["extract", str(rich_pcap), "-o", str(a), "--jobs", "1"]) == 0
    assert main(["extract", str(rich_pcap), "-o", str(b), "--jobs", "4"]) == 0
    assert a.read_text() == b.read_text()


def test_morph_then_extract_differs(rich_pcap, tmp_path):
    morphed = tmp_path / "morphed.pcap"
    assert main(["morph", str(rich_pcap), str(morphed), "--spec", "a",
                 "--seed", "5"]) == 0
    base, after = tmp_path / "base.csv", tmp_path / "after.csv"
    assert main(["extract", str(rich_pcap), "-o", str(base), "--jobs", "1"]) == 0
    assert main(["extract", str(morphed), "-o", str(after), "--jobs", "1"]) == 0
    assert base.read_text() != after.read_text()


def test_morph_deterministic_output(rich_pcap, tmp_path):
    one, two = tmp_path / "m1.pcap", tmp_path / "m2.pcap"
    for out in (one, two):
        assert main(["morph", str(rich_pcap), str(out), "--spec", "q",
                     "--seed", "99"]) == 0
    assert one.read_bytes() == two.read_bytes()


def test_morph_spec_file(rich_pcap, tmp_path):
    spec = tmp_path / "pipeline.spec"
    spec.write_text("delay mode=constant c=0.5\nduplicate pct=100\n")
    out = tmp_path / "m.pcap"
    assert main(["morph", str(rich_pcap), str(out), "--spec", str(spec),
                 "--seed", "1"]) == 0
    assert out.exists()


def test_morph_unknown_spec(rich_pcap, tmp_path):
    assert main(["morph", str(rich_pcap), str(tmp_path / "m.pcap"),
                 "--spec", "zz", "--seed", "1"]) == 1


def test_label_and_audit_roundtrip(handshake3_pcap, tmp_path, capsys):
    csv_in = tmp_path / "f.csv"
    csv_out = tmp_path / "labeled.csv"
    main(["extract", str(handshake3_pcap), "-o", str(csv_in), "--jobs", "1"])
    assert main(["label", str(csv_in), "-o", str(csv_out),
                 "--label-3", "1", "--service", "apache", "--modifier", "q"]) == 0
    rows = read_csv(csv_out)
    assert rows[0].labels["label_2"] == "attack"
    assert rows[0].labels["label_poly"] == "1_apache"
    assert rows[0].labels["label_poly_o"] == "1_q_apache"
    capsys.readouterr()
    assert main(["audit", str(csv_out)]) == 0
    printed = capsys.readouterr().out
    assert "rows=1" in printed and "label_3.1=1" in printed


def test_bench_cv_on_synthetic_csv(tmp_path, capsys):
    import numpy as np

    from asnmkit.features import FeatureVector

    rng = np.random.default_rng(1)
    rows = []
    for i in range(60):
        attack = i < 20
        rows.append(
            FeatureVector(
                connection_id="s%d" % i,
                values={
                    "MeanPktLenIn": float(rng.normal(5 if attack else 0, 0.4)),
                    "SigPktLenOut": float(rng.normal(0, 1)),
                },
                labels={"label_2": "attack" if attack else "legitimate",
                        "label_3": "1" if attack else "3"},
            )
        )
    data = tmp_path / "toy.csv"
    write_csv(rows, data)
    report = tmp_path / "report.kv"
    roc = tmp_path / "roc.csv"
    code = main([
        "bench", "--dataset", str(data), "--features", "MeanPktLenIn,SigPktLenOut",
        "--classifier", "nb", "--experiment", "cv", "--seed", "4",
        "--report", str(report), "--roc", str(roc),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "accuracy" in out
    kv = report.read_text()
    assert "accuracy=" in kv and "confusion.attack.attack=" in kv
    assert roc.read_text().startswith("threshold,tpr,fpr")


def test_bench_missing_dataset_exit1(tmp_path, monkeypatch):
    monkeypatch.delenv("ASNM_DATA_DIR", raising=False)
    assert main(["bench", "--dataset", "cdx", "--features", "cdx-nb",
                 "--seed", "1"]) == 1


def test_extract_with_catalog_subset(handshake3_pcap, tmp_path):
    from asnmkit.features import default_catalog

    catalog = default_catalog()
    manifest = tmp_path / "subset.catalog"
    catalog.subset(["PktCntIn", "PktCntOut", "MeanPktLenIn"]).save(manifest)
    out = tmp_path / "subset.csv"
    assert main(["extract", str(handshake3_pcap), "-o", str(out),
                 "--catalog", str(manifest), "--jobs", "1"]) == 0
    rows = read_csv(out)
    assert list(rows[0].values.keys()) == ["PktCntIn", "PktCntOut", "MeanPktLenIn"]


def test_extract_local_prefixes_flag(handshake3_pcap, tmp_path):
    out = tmp_path / "loc.csv"
    assert main(["extract", str(handshake3_pcap), "-o", str(out),
                 "--local-prefixes", "192.168.0.0/16", "--jobs", "1"]) == 0
    rows = read_csv(out)
    assert rows[0].values["ClientLocal"] == 1
    assert rows[0].values["SameSubnet"] == 1


def test_morph_allow_broken_handshake(rich_pcap, tmp_path):
    kept = tmp_path / "kept.pcap"
    broken = tmp_path / "broken.pcap"
    spec = tmp_path / "all.spec"
    spec.write_text("loss pct=100\n")
    assert main(["morph", str(rich_pcap), str(kept), "--spec", str(spec),
                 "--seed", "3"]) == 0
    assert main(["morph", str(rich_pcap), str(broken), "--spec", str(spec),
                 "--seed", "3", "--allow-broken-handshake"]) == 0
    from asnmkit.capture import read_pcap

    assert len(read_pcap(kept)) == 6   # three handshake packets per connection
    assert len(read_pcap(broken)) == 0
