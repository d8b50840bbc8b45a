"""Exception hierarchy shared by all asnmkit modules."""


class AsnmkitError(Exception):
    """Base class for all toolkit errors."""


class PcapFormatError(AsnmkitError):
    """Capture file does not carry a valid libpcap global header."""


class TruncatedCaptureError(AsnmkitError):
    """Capture ends mid-record; `.trace` holds everything decoded so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class DomainError(AsnmkitError):
    """Operation called with arguments outside its stated domain."""


class ConfigError(AsnmkitError):
    """Bad technique id, spec file, or catalog manifest."""


class CsvFormatError(AsnmkitError):
    """Malformed dataset file; message carries the offending line number."""


class DatasetNotFoundError(AsnmkitError):
    """A published dataset was requested but could not be located."""


class ExperimentError(AsnmkitError):
    """Benchmark experiment refused (degenerate dataset, missing class)."""
