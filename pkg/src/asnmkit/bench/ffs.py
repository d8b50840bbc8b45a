"""Greedy forward feature selection scored by cross-validated performance.

Each round adds the candidate maximizing the positive-class F1 under k-fold
CV.  One non-improving round is accepted (the feature is kept) so the
search can escape local extremes; a second consecutive non-improvement
stops the search without keeping that candidate.
"""

from __future__ import annotations

import numpy as np

from .evaluate import evaluate
from .folds import stratified_kfold

MAX_FEATURES = 20


def forward_feature_selection(
    X,
    y,
    make_classifier,
    candidates=None,
    positive="attack",
    max_features: int = MAX_FEATURES,
    patience: int = 1,
    k: int = 5,
    seed: int = 0,
    objective: str = "f1",
):
    """Returns the selected column indices in selection order."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    candidates = list(range(X.shape[1])) if candidates is None else list(candidates)
    if not candidates or max_features <= 0:
        return []
    split = stratified_kfold(y, k, seed)

    def score_of(cols):
        report = evaluate(X[:, cols], y, split, make_classifier, positive=positive)
        return report.f1_positive if objective == "f1" else report.accuracy

    selected: list[int] = []
    best_score = -1.0
    misses = 0
    while candidates and len(selected) < max_features:
        round_best = None
        round_score = -1.0
        for cand in candidates:
            s = score_of(selected + [cand])
            if s > round_score:
                round_best, round_score = cand, s
        if round_score > best_score:
            best_score = round_score
            misses = 0
        else:
            misses += 1
            if misses > patience:
                break
        selected.append(round_best)
        candidates.remove(round_best)
    return selected
