"""Naive Bayes with per-feature Gaussian kernel density estimation.

Class-conditional likelihoods are products of univariate KDEs, evaluated in
log space.  Bandwidths follow Silverman's rule per class and feature,
floored at 1e-6 of the feature's global range so zero-variance features
stay usable.  Ties break toward the lexicographically first class label.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

BANDWIDTH_FLOOR_FRAC = 1e-6


def silverman_bandwidth(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return 0.0
    std = float(values.std(ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    return 0.9 * spread * n ** (-0.2)


class NaiveBayesKde:
    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = sorted(set(y.tolist()))
        self.n_features_ = X.shape[1]
        ranges = X.max(axis=0) - X.min(axis=0)
        floors = np.where(ranges > 0, BANDWIDTH_FLOOR_FRAC * ranges,
                          BANDWIDTH_FLOOR_FRAC)
        self._models = []
        self._log_priors = []
        for cls in self.classes_:
            rows = X[y == cls]
            self._log_priors.append(np.log(rows.shape[0] / X.shape[0]))
            per_feature = []
            for j in range(self.n_features_):
                train = np.sort(rows[:, j])
                h = max(silverman_bandwidth(train), float(floors[j]))
                per_feature.append((train, h))
            self._models.append(per_feature)
        return self

    def log_posterior(self, X) -> np.ndarray:
        """Unnormalized log posterior, shape (n_samples, n_classes)."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], len(self.classes_)))
        for c, per_feature in enumerate(self._models):
            total = np.full(X.shape[0], self._log_priors[c])
            for j, (train, h) in enumerate(per_feature):
                total += kernels.kde_logpdf(train, h, np.ascontiguousarray(X[:, j]))
            out[:, c] = total
        return out

    def predict(self, X):
        post = self.log_posterior(X)
        return [self.classes_[i] for i in np.argmax(post, axis=1)]

    def score(self, X, positive) -> np.ndarray:
        """Log-posterior margin of `positive` over the best other class."""
        post = self.log_posterior(X)
        pos = self.classes_.index(positive)
        others = [i for i in range(len(self.classes_)) if i != pos]
        if not others:
            return post[:, pos]
        return post[:, pos] - post[:, others].max(axis=1)
