"""Dataset files: label composition, CSV emit/ingest, class counts, and
loading of the three published feature tables (located via ASNM_DATA_DIR).

The reader is deliberately tolerant: it auto-detects the field delimiter,
accepts decimal commas, and passes unknown columns through verbatim so the
published tables load even where they contain features outside this
toolkit's catalog.
"""

from __future__ import annotations

import csv
import glob
import os
from dataclasses import dataclass, field

from .errors import CsvFormatError, DatasetNotFoundError, DomainError
from .features import FeatureVector

LABEL_SCHEMAS = ("label_2", "label_3", "label_poly", "label_poly_s", "label_poly_o")
SEPARATOR = "_"

LABEL2_LEGIT = "legitimate"
LABEL2_ATTACK = "attack"

_LEGIT_TOKENS = {"legitimate", "legit", "normal", "benign", "false", "no", "0", "3"}
_ATTACK_TOKENS = {"attack", "intrusion", "malicious", "true", "yes", "1", "2"}


@dataclass
class LabelSet:
    """Label material for one sample; schemas compose from these parts."""

    label_2: str | None = None          # "legitimate" | "attack"
    label_3: int | None = None          # 1 direct, 2 obfuscated, 3 legitimate
    service: str | None = None          # e.g. "apache"
    modifier: str | None = None         # technique letter

    def __post_init__(self):
        if self.label_3 is not None:
            implied = LABEL2_LEGIT if self.label_3 == 3 else LABEL2_ATTACK
            if self.label_2 is None:
                self.label_2 = implied
            elif self.label_2 != implied:
                raise DomainError(
                    "label_3=%r contradicts label_2=%r" % (self.label_3, self.label_2)
                )


def compose_labels(labels: LabelSet, schema: str) -> str:
    """Render one label schema; parts join with '_', obfuscation id sits
    between class and service in label_poly_o."""
    def need(value, part):
        if value is None:
            raise DomainError("schema %s needs %s" % (schema, part))
        return str(value)

    if schema == "label_2":
        return need(labels.label_2, "label_2")
    if schema == "label_3":
        return need(labels.label_3, "label_3")
    if schema == "label_poly":
        return SEPARATOR.join((need(labels.label_3, "label_3"),
                               need(labels.service, "service")))
    if schema == "label_poly_s":
        return SEPARATOR.join((need(labels.label_3, "label_3"),
                               need(labels.service, "service"),
                               need(labels.modifier, "modifier")))
    if schema == "label_poly_o":
        return SEPARATOR.join((need(labels.label_3, "label_3"),
                               need(labels.modifier, "modifier"),
                               need(labels.service, "service")))
    raise DomainError("unknown label schema %r" % schema)


def attach_labels(rows, labels: LabelSet, schemas=("label_2", "label_3")):
    for row in rows:
        for schema in schemas:
            row.labels[schema] = compose_labels(labels, schema)
    return rows


def _format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path) -> None:
    """Emit feature vectors as a comma-separated table: id column, feature
    columns in vector order, then any label columns present."""
    rows = list(rows)
    if rows:
        feature_ids = list(rows[0].values.keys())
        label_cols = [s for s in LABEL_SCHEMAS if s in rows[0].labels]
    else:
        feature_ids, label_cols = [], []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + feature_ids + label_cols)
        for row in rows:
            if list(row.values.keys()) != feature_ids:
                raise CsvFormatError("rows disagree on feature columns")
            record = [row.connection_id]
            record += [_format_value(row.values[c]) for c in feature_ids]
            record += [row.labels.get(c, "") for c in label_cols]
            writer.writerow(record)


def _sniff_delimiter(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in (",", ";", "\t")}
    return max(counts, key=counts.get)


def _parse_value(token: str, delimiter: str):
    token = token.strip()
    if token == "":
        return ""
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    if delimiter != "," and "," in token:
        try:
            return float(token.replace(",", ".", 1))
        except ValueError:
            pass
    return token


def read_csv(path):
    """Ingest a feature table; returns FeatureVector rows.

    Column `id` (if any) becomes the connection id, label_* columns become
    labels, everything else is a feature and parses numerically when it can.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            return []
        delimiter = _sniff_delimiter(first)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader)
        header = [h.strip().lstrip("﻿") for h in header]
        rows = []
        for lineno, record in enumerate(reader, 2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise CsvFormatError(
                    "%s line %d: %d fields, header has %d"
                    % (path, lineno, len(record), len(header))
                )
            fv = FeatureVector(connection_id="row-%d" % (lineno - 1))
            for col, token in zip(header, record):
                if col == "id":
                    fv.connection_id = token
                elif col.lower() in LABEL_SCHEMAS:
                    fv.labels[col.lower()] = token.strip()
                else:
                    fv.values[col] = _parse_value(token, delimiter)
            fv.valid = {c: True for c in fv.values}
            rows.append(fv)
        return rows


def class_counts(rows, schema: str) -> dict:
    counts: dict = {}
    for row in rows:
        token = row.labels.get(schema, "<missing>")
        counts[token] = counts.get(token, 0) + 1
    return counts


def normalize_label2(token) -> str | None:
    t = str(token).strip().lower()
    if t in _LEGIT_TOKENS:
        return LABEL2_LEGIT
    if t in _ATTACK_TOKENS:
        return LABEL2_ATTACK
    return None


def normalize_label3(token) -> int | None:
    t = str(token).strip()
    return int(t) if t in ("1", "2", "3") else None


def binary_labels(rows) -> list:
    """Per-row 'legitimate'/'attack', preferring label_3 over label_2."""
    out = []
    for i, row in enumerate(rows):
        value = None
        if "label_3" in row.labels:
            l3 = normalize_label3(row.labels["label_3"])
            if l3 is not None:
                value = LABEL2_LEGIT if l3 == 3 else LABEL2_ATTACK
        if value is None and "label_2" in row.labels:
            value = normalize_label2(row.labels["label_2"])
        if value is None:
            raise DomainError(
                "row %d has no usable binary label (labels=%r)" % (i, row.labels)
            )
        out.append(value)
    return out


def audit(rows) -> dict:
    """Dataset health report: counts per schema plus label-consistency
    violations (reported, never fatal)."""
    report = {"rows": len(rows), "counts": {}, "violations": []}
    schemas = set()
    for row in rows:
        schemas.update(row.labels.keys())
    for schema in sorted(schemas):
        report["counts"][schema] = class_counts(rows, schema)
    for i, row in enumerate(rows):
        l3 = normalize_label3(row.labels.get("label_3", ""))
        l2 = normalize_label2(row.labels.get("label_2", ""))
        if l3 is not None and l2 is not None:
            implied = LABEL2_LEGIT if l3 == 3 else LABEL2_ATTACK
            if l2 != implied:
                report["violations"].append(
                    "row %d: label_3=%d with label_2=%s" % (i, l3, l2)
                )
    return report


DATASET_PATTERNS = {
    "cdx": ("*cdx*", "*CDX*"),
    "tun": ("*tun*", "*TUN*"),
    "npbo": ("*npbo*", "*NPBO*"),
}


def locate_dataset(name_or_path: str) -> str:
    """Resolve a dataset name (cdx/tun/npbo) or explicit path to a CSV file."""
    if os.path.isfile(name_or_path):
        return name_or_path
    key = name_or_path.lower()
    if key not in DATASET_PATTERNS:
        raise DatasetNotFoundError(
            "%r is neither a file nor one of %s"
            % (name_or_path, "/".join(DATASET_PATTERNS))
        )
    data_dir = os.environ.get("ASNM_DATA_DIR", "")
    if not data_dir:
        raise DatasetNotFoundError(
            "set ASNM_DATA_DIR to the directory holding the published "
            "ASNM CSV files to load dataset %r" % name_or_path
        )
    for pattern in DATASET_PATTERNS[key]:
        hits = sorted(glob.glob(os.path.join(data_dir, pattern + ".csv")))
        hits += sorted(glob.glob(os.path.join(data_dir, pattern)))
        for hit in hits:
            if os.path.isfile(hit):
                return hit
    raise DatasetNotFoundError(
        "no file matching %s under %s" % (DATASET_PATTERNS[key][0], data_dir)
    )


def load_dataset(name_or_path: str):
    return read_csv(locate_dataset(name_or_path))
