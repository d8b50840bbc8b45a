"""ASNM feature extraction: maps a connection and its context to a feature vector."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError, DomainError
from .catalog import CatalogEntry, FeatureCatalog, default_catalog
from .compute import compute_all

__all__ = [
    "CatalogEntry",
    "FeatureCatalog",
    "FeatureVector",
    "default_catalog",
    "extract",
]


@dataclass
class FeatureVector:
    """Ordered feature values for one connection.

    `values` maps column id to a finite number (or bounded token for the
    closing feature); ids that hit a degenerate case carry sentinel 0 and
    appear in `valid` as False.  `labels` is filled by dataset-io.
    """

    connection_id: str
    values: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)


def extract(conn, ctx, catalog: FeatureCatalog, local_prefixes=()) -> FeatureVector:
    """Compute one value per catalog column for `conn` inside context `ctx`.

    Deterministic: identical inputs produce bit-identical vectors.
    """
    if ctx is not None and ctx.center is not conn:
        raise DomainError("context center does not match the analyzed connection")
    table = compute_all(conn, ctx, local_prefixes)
    values = {}
    valid = {}
    for entry in catalog.entries:
        if entry.family not in table:
            raise ConfigError("catalog family %r has no extractor" % entry.family)
        vals, ok = table[entry.family]
        if len(vals) != entry.size:
            raise ConfigError(
                "family %r computed %d values, catalog says %d"
                % (entry.family, len(vals), entry.size)
            )
        for col, v in zip(entry.column_ids(), vals):
            values[col] = v
            valid[col] = ok
    return FeatureVector(connection_id=conn.conn_id, values=values, valid=valid)
