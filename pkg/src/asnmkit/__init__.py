"""asnmkit: TCP connection reconstruction from packet traces, behavioral
feature extraction, non-payload adversarial trace obfuscation, and
evasion/augmentation benchmarking of supervised classifiers."""

__version__ = "0.1.0"

from . import bench, capture, context, dataset_io, features, flows, kernels, morph
from .errors import AsnmkitError

__all__ = [
    "AsnmkitError",
    "bench",
    "capture",
    "context",
    "dataset_io",
    "features",
    "flows",
    "kernels",
    "morph",
]
