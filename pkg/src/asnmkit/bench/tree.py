"""Binary CART decision tree with the Gini index as split criterion.

Thresholds sit midway between consecutive distinct values; equal-gain
splits resolve to the lowest feature index, then the lowest threshold.
Left branch takes x <= threshold.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

_GAIN_EPS = 1e-12


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "label", "pos_frac")

    def __init__(self):
        self.feature = None
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.label = None
        self.pos_frac = 0.0


class GiniTree:
    def __init__(self, max_depth=None, min_leaf=1, min_split=2):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.min_split = min_split

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = sorted(set(y.tolist()))
        codes = np.array([self.classes_.index(v) for v in y], dtype=np.int64)
        self.root_ = self._build(X, codes, 0)
        return self

    def _make_leaf(self, codes):
        node = _Node()
        counts = np.bincount(codes, minlength=len(self.classes_))
        node.label = self.classes_[int(np.argmax(counts))]
        node.pos_frac = counts / counts.sum()
        return node

    def best_split(self, X, codes):
        """Best (feature, threshold, gain) over all features, or None."""
        best = None
        for j in range(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            gain, thr = kernels.gini_scan(
                np.ascontiguousarray(X[order, j]),
                np.ascontiguousarray(codes[order]),
                len(self.classes_),
            )
            if gain > _GAIN_EPS and (best is None or gain > best[2] + _GAIN_EPS):
                best = (j, thr, gain)
        return best

    def _build(self, X, codes, depth):
        pure = np.all(codes == codes[0])
        depth_stop = self.max_depth is not None and depth >= self.max_depth
        if pure or depth_stop or codes.size < self.min_split:
            return self._make_leaf(codes)
        choice = self.best_split(X, codes)
        if choice is None:
            return self._make_leaf(codes)
        j, thr, _gain = choice
        mask = X[:, j] <= thr
        if mask.sum() < self.min_leaf or (~mask).sum() < self.min_leaf:
            return self._make_leaf(codes)
        node = _Node()
        node.feature = j
        node.threshold = thr
        node.left = self._build(X[mask], codes[mask], depth + 1)
        node.right = self._build(X[~mask], codes[~mask], depth + 1)
        return node

    def _descend(self, x):
        node = self.root_
        while node.feature is not None:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return [self._descend(x).label for x in X]

    def score(self, X, positive) -> np.ndarray:
        """Fraction of `positive` training samples in the reached leaf."""
        X = np.asarray(X, dtype=np.float64)
        pos = self.classes_.index(positive)
        return np.array(
            [float(self._descend(x).pos_frac[pos]) for x in X]
        )
