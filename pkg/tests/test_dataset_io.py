import pytest

from asnmkit.dataset_io import (
    LabelSet,
    attach_labels,
    audit,
    binary_labels,
    class_counts,
    compose_labels,
    locate_dataset,
    read_csv,
    write_csv,
)
from asnmkit.errors import CsvFormatError, DatasetNotFoundError, DomainError
from asnmkit.features import FeatureVector


def vec(i, labels=None):
    return FeatureVector(
        connection_id="c%03d" % i,
        values={
            "MeanPktLenIn": 100.5 + i * 0.125,
            "PktCntOut": i,
            "ConClosing": "legal" if i % 2 else "illegal",
            "FourGonAngleN[9]": -3.0 + i / 7.0,
        },
        labels=dict(labels or {}),
    )


def test_compose_label_poly():
    labels = LabelSet(label_3=3, service="apache")
    assert compose_labels(labels, "label_poly") == "3_apache"
    assert compose_labels(labels, "label_2") == "legitimate"


def test_compose_label_poly_o_ordering():
    labels = LabelSet(label_3=2, service="samba", modifier="q")
    assert compose_labels(labels, "label_poly_o") == "2_q_samba"
    assert compose_labels(labels, "label_poly_s") == "2_samba_q"


def test_compose_missing_part():
    labels = LabelSet(label_3=1, service="apache")
    with pytest.raises(DomainError):
        compose_labels(labels, "label_poly_s")


def test_label_consistency_enforced():
    with pytest.raises(DomainError):
        LabelSet(label_2="legitimate", label_3=1)
    assert LabelSet(label_3=2).label_2 == "attack"
    assert LabelSet(label_3=3).label_2 == "legitimate"


def test_write_read_roundtrip(tmp_path):
    rows = [vec(i, {"label_2": "attack" if i % 3 else "legitimate"}) for i in range(100)]
    path = tmp_path / "a.csv"
    write_csv(rows, path)
    back = read_csv(path)
    assert len(back) == 100
    for orig, got in zip(rows, back):
        assert got.connection_id == orig.connection_id
        assert got.values == orig.values
        assert got.labels == orig.labels


def test_empty_rows_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv([], path)
    assert path.read_text().strip() == "id"
    assert read_csv(path) == []


def test_ragged_row_reports_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("id,a,b\nr1,1,2\nr2,3\n")
    with pytest.raises(CsvFormatError) as err:
        read_csv(path)
    assert "line 3" in str(err.value)


def test_semicolon_and_decimal_comma(tmp_path):
    path = tmp_path / "euro.csv"
    path.write_text("id;Feat1;label_2\nr1;3,25;attack\nr2;4;legitimate\n")
    rows = read_csv(path)
    assert rows[0].values["Feat1"] == 3.25
    assert rows[1].values["Feat1"] == 4
    assert rows[0].labels["label_2"] == "attack"


def test_unknown_columns_pass_through(tmp_path):
    path = tmp_path / "extra.csv"
    path.write_text("id,MysteryFeature,label_3\nr1,42,2\n")
    rows = read_csv(path)
    assert rows[0].values["MysteryFeature"] == 42
    assert rows[0].labels["label_3"] == "2"


def test_class_counts_and_attach():
    rows = [vec(i) for i in range(6)]
    attach_labels(rows[:4], LabelSet(label_3=3, service="apache"))
    attach_labels(rows[4:], LabelSet(label_3=1, service="apache"))
    counts = class_counts(rows, "label_3")
    assert counts == {"3": 4, "1": 2}
    assert class_counts([], "label_3") == {}


def test_binary_labels_prefer_label3():
    rows = [
        vec(0, {"label_2": "attack", "label_3": "3"}),
        vec(1, {"label_2": "0"}),
        vec(2, {"label_2": "1"}),
    ]
    assert binary_labels(rows) == ["legitimate", "legitimate", "attack"]
    with pytest.raises(DomainError):
        binary_labels([vec(3, {"label_2": "banana"})])


def test_audit_reports_violations():
    rows = [
        vec(0, {"label_2": "legitimate", "label_3": "1"}),
        vec(1, {"label_2": "attack", "label_3": "2"}),
    ]
    report = audit(rows)
    assert report["rows"] == 2
    assert len(report["violations"]) == 1
    assert "row 0" in report["violations"][0]


def test_locate_dataset_needs_env(tmp_path, monkeypatch):
    monkeypatch.delenv("ASNM_DATA_DIR", raising=False)
    with pytest.raises(DatasetNotFoundError):
        locate_dataset("cdx")
    monkeypatch.setenv("ASNM_DATA_DIR", str(tmp_path))
    with pytest.raises(DatasetNotFoundError):
        locate_dataset("tun")
    target = tmp_path / "ASNM-TUN.csv"
    target.write_text("id\n")
    assert locate_dataset("tun") == str(target)
    with pytest.raises(DatasetNotFoundError):
        locate_dataset("nonsense")
