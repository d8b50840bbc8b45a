"""Pure-numpy implementations of the hot numeric kernels.

These mirror the compiled versions in `_speedups.pyx`; whichever backend is
active is chosen in `kernels/__init__.py`.  Results agree with the compiled
backend to floating-point roundoff (summation order differs).
"""

from __future__ import annotations

import numpy as np

_CHUNK = 512
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def kde_logpdf(train: np.ndarray, h: float, query: np.ndarray) -> np.ndarray:
    """Log of a Gaussian kernel density estimate.

    `train` must be sorted ascending; returns log((1/(n*h)) * sum(phi((q-x)/h)))
    evaluated at every query point, never -inf (the nearest kernel always
    contributes its exact log term even when the sum underflows).
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n = train.shape[0]
    out = np.empty(query.shape[0], dtype=np.float64)
    norm = np.log(n) + np.log(h) + _LOG_SQRT_2PI
    inv2h2 = 1.0 / (2.0 * h * h)
    for lo in range(0, query.shape[0], _CHUNK):
        q = query[lo : lo + _CHUNK]
        e = -((q[None, :] - train[:, None]) ** 2) * inv2h2
        m = e.max(axis=0)
        s = np.exp(e - m[None, :]).sum(axis=0)
        out[lo : lo + q.shape[0]] = m + np.log(s) - norm
    return out


def gini_scan(values: np.ndarray, classes: np.ndarray, n_classes: int):
    """Best binary split of one feature by Gini impurity decrease.

    `values` sorted ascending with `classes` aligned (int codes 0..n_classes-1).
    Returns (gain, threshold) with threshold the midpoint between the two
    distinct values around the best cut; (-1.0, 0.0) when no split exists.
    Ties keep the lowest threshold.
    """
    values = np.asarray(values, dtype=np.float64)
    classes = np.asarray(classes, dtype=np.int64)
    n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), classes] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]  # counts with left size i+1
    total = left[-1] + onehot[-1]
    right = total[None, :] - left
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    gini_left = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gini_right = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    child = (nl * gini_left + nr * gini_right) / n
    parent = 1.0 - ((total / n) ** 2).sum()
    gain = parent - child
    cut_ok = values[:-1] < values[1:]
    if not cut_ok.any():
        return -1.0, 0.0
    gain = np.where(cut_ok, gain, -np.inf)
    best = int(np.argmax(gain))
    return float(gain[best]), float(0.5 * (values[best] + values[best + 1]))
