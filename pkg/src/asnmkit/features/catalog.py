"""Feature catalog: the versioned list of per-connection feature families.

A family is one named feature, possibly vector-valued; vector families
expand to `Name[k]` columns.  The default catalog covers the five feature
categories with every named instance plus its parametric siblings.  A
catalog manifest is a line-oriented text file so runs can pin or subset
the feature space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

CATEGORIES = ("statistical", "dynamic", "localization", "distributed", "behavioral")

# upper bounds from the published per-category totals
CATEGORY_LIMITS = {
    "statistical": 77,
    "dynamic": 32,
    "localization": 8,
    "distributed": 34,
    "behavioral": 43,
}

DISTRIBUTED_WINDOWS = (1, 4, 8, 32, 64)
POLY_DEGREES = (3, 8, 13)
FOURIER_N = 32
FOURIER_COEFFS = 16
GAUSS_SLICES = 8
FLAG_NAMES = ("Syn", "Fin", "Rst", "Psh", "Ack", "Urg")


@dataclass(frozen=True)
class CatalogEntry:
    family: str
    category: str
    size: int = 1
    uses_context: bool = False
    params: tuple = ()  # ((key, value), ...) kept hashable

    def column_ids(self):
        if self.size == 1:
            return [self.family]
        return ["%s[%d]" % (self.family, k) for k in range(self.size)]


@dataclass
class FeatureCatalog:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.family in seen:
                raise ConfigError("duplicate catalog family %r" % e.family)
            if e.category not in CATEGORIES:
                raise ConfigError("unknown category %r" % e.category)
            seen.add(e.family)

    def column_ids(self):
        cols = []
        for e in self.entries:
            cols.extend(e.column_ids())
        return cols

    def category_counts(self):
        counts = {c: 0 for c in CATEGORIES}
        for e in self.entries:
            counts[e.category] += 1
        return counts

    def subset(self, families):
        byname = {e.family: e for e in self.entries}
        missing = [f for f in families if f not in byname]
        if missing:
            raise ConfigError("families not in catalog: %s" % ", ".join(missing))
        return FeatureCatalog([byname[f] for f in families])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# asnmkit feature catalog v1\n")
            fh.write("# family\tcategory\tsize\tcontext\tparams\n")
            for e in self.entries:
                params = ",".join("%s=%s" % kv for kv in e.params)
                fh.write(
                    "%s\t%s\t%d\t%d\t%s\n"
                    % (e.family, e.category, e.size, int(e.uses_context), params)
                )

    @classmethod
    def load(cls, path):
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) < 4:
                    raise ConfigError(
                        "catalog line %d: expected family/category/size/context"
                        % lineno
                    )
                family, category, size, uses_ctx = parts[:4]
                params = ()
                if len(parts) > 4 and parts[4]:
                    params = tuple(
                        tuple(kv.split("=", 1)) for kv in parts[4].split(",")
                    )
                entries.append(
                    CatalogEntry(
                        family=family,
                        category=category,
                        size=int(size),
                        uses_context=bool(int(uses_ctx)),
                        params=params,
                    )
                )
        return cls(entries)


def default_catalog() -> FeatureCatalog:
    entries = []

    def add(family, category, size=1, uses_context=False, **params):
        entries.append(
            CatalogEntry(
                family=family,
                category=category,
                size=size,
                uses_context=uses_context,
                params=tuple(sorted((k, str(v)) for k, v in params.items())),
            )
        )

    # statistical: size statistics, flag counts, header-length mode
    for stat in ("PktCnt", "PktLenSum", "MeanPktLen", "MedPktLen", "ModPktLen", "SigPktLen"):
        for direction in ("In", "Out", "All"):
            add(stat + direction, "statistical", direction=direction.lower())
    for flag in FLAG_NAMES:
        for direction in ("In", "Out"):
            add("ConTcp%sCnt%s" % (flag, direction), "statistical",
                flag=flag.upper(), direction=direction.lower())
    # legacy names used by some published columns; same definition
    for flag in FLAG_NAMES:
        for direction in ("In", "Out"):
            add("%sCnt%s" % (flag, direction), "statistical",
                flag=flag.upper(), direction=direction.lower())
    add("ModTCPHdrLen", "statistical")

    # dynamic: speeds, inter-arrival, errors, context density
    for direction in ("In", "Out"):
        add("MeanThroughput" + direction, "dynamic", direction=direction.lower())
        add("PeakThroughput" + direction, "dynamic", direction=direction.lower())
        add("MeanIat" + direction, "dynamic", direction=direction.lower())
        add("SigIat" + direction, "dynamic", direction=direction.lower())
    add("RetransCnt", "dynamic")
    add("RetransRatio", "dynamic")
    add("SynRetryCnt", "dynamic")
    add("FlowDensity", "dynamic", uses_context=True)

    # localization: endpoints and locality flags
    add("ClientIpOct", "localization", size=4)
    add("ServerIpOct", "localization", size=4)
    add("ClientPort", "localization")
    add("ServerPort", "localization")
    add("ClientLocal", "localization")
    add("ServerLocal", "localization")
    add("SameSubnet", "localization")

    # distributed: packet lengths split into 10 sub-intervals of [0, T)
    for window in DISTRIBUTED_WINDOWS:
        for direction in ("In", "Out"):
            add("%sPktLen%ds10i" % (direction, window), "distributed",
                size=10, window=window, direction=direction.lower())
    # alias family: T=1 inbound under its short published name
    add("InPkt1s10i", "distributed", size=10, window=1, direction="in")

    # behavioral: fits, spectra, gaussian products, closing, neighbor counts
    for degree in POLY_DEGREES:
        for direction in ("In", "Out"):
            add("PolyInd%dord%s" % (degree, direction), "behavioral",
                size=degree + 1, degree=degree, direction=direction.lower())
    for kind in ("Modul", "Angle"):
        for mode in ("In", "Out", "N"):
            add("FourGon%s%s" % (kind, mode), "behavioral",
                size=FOURIER_COEFFS, mode=mode.lower(), n=FOURIER_N)
    add("GaussProds8All", "behavioral", size=GAUSS_SLICES, mode="all")
    add("GaussProds8Out", "behavioral", size=GAUSS_SLICES, mode="out")
    add("ConClosing", "behavioral")
    add("CntOfOldFlows", "behavioral", uses_context=True, horizon=300)
    add("CntOfNewFlows", "behavioral", uses_context=True, horizon=300)

    cat = FeatureCatalog(entries)
    counts = cat.category_counts()
    for name, limit in CATEGORY_LIMITS.items():
        assert counts[name] <= limit, (name, counts[name])
    return cat
