"""Stratified fold assembly for cross-validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass
class Split:
    k: int
    assignments: np.ndarray  # row index -> fold index
    stratify_on: str = "label"

    def fold_indices(self, fold: int):
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def stratified_kfold(labels, k: int, seed: int, stratify_on: str = "label") -> Split:
    """Seeded shuffle within each class, then round-robin fold assignment.

    Per-fold class proportions stay within one sample of the global ones.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise DomainError("k must be at least 2")
    if k > labels.size:
        raise DomainError("k exceeds the number of rows")
    rng = np.random.Generator(np.random.PCG64(seed))
    assignments = np.empty(labels.size, dtype=np.int64)
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        for i, row in enumerate(idx):
            assignments[row] = i % k
    return Split(k=k, assignments=assignments, stratify_on=stratify_on)
