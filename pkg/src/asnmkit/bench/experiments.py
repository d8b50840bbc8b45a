"""Experiment drivers: plain cross-validation, evasion (train without
obfuscated attacks, then predict them), and training-data augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset_io import LABEL2_ATTACK, LABEL2_LEGIT, binary_labels, normalize_label3
from ..errors import DomainError, ExperimentError
from .evaluate import EvalReport, evaluate
from .folds import stratified_kfold
from .nb_kde import NaiveBayesKde
from .tree import GiniTree

CLASSIFIERS = {
    "nb": NaiveBayesKde,
    "tree": GiniTree,
}


def resolve_classifier(classifier):
    """Accepts 'nb'/'tree' or any zero-arg factory (open for plug-ins)."""
    if callable(classifier):
        return classifier
    try:
        return CLASSIFIERS[classifier]
    except KeyError:
        raise ExperimentError(
            "unknown classifier %r; built-ins: %s"
            % (classifier, ", ".join(sorted(CLASSIFIERS)))
        )


def rows_to_matrix(rows, feature_ids) -> np.ndarray:
    """Dense float matrix of the requested feature columns."""
    out = np.empty((len(rows), len(feature_ids)), dtype=np.float64)
    for i, row in enumerate(rows):
        for j, fid in enumerate(feature_ids):
            if fid not in row.values:
                raise DomainError(
                    "row %s lacks feature %r (columns: %d)"
                    % (row.connection_id, fid, len(row.values))
                )
            v = row.values[fid]
            if isinstance(v, str):
                t = v.strip().lower()
                if t in ("true", "yes"):
                    v = 1.0
                elif t in ("false", "no", ""):
                    v = 0.0
                else:
                    raise DomainError(
                        "feature %r of row %s is not numeric: %r"
                        % (fid, row.connection_id, v)
                    )
            out[i, j] = float(v)
    if not np.isfinite(out).all():
        raise DomainError("feature matrix contains non-finite values")
    return out


def three_class_labels(rows):
    labels = []
    for i, row in enumerate(rows):
        l3 = normalize_label3(row.labels.get("label_3", ""))
        if l3 is None:
            raise ExperimentError(
                "row %d lacks a three-class label; evasion experiments need label_3" % i
            )
        labels.append(l3)
    return np.asarray(labels)


def cv_experiment(rows, feature_ids, classifier="nb", k=5, seed=0, jobs=1) -> EvalReport:
    """Stratified k-fold CV of the whole dataset under the binary label."""
    X = rows_to_matrix(rows, feature_ids)
    y = np.asarray(binary_labels(rows))
    if len(set(y.tolist())) < 2:
        raise ExperimentError("dataset has a single class; nothing to benchmark")
    split = stratified_kfold(y, k, seed)
    return evaluate(X, y, split, resolve_classifier(classifier),
                    positive=LABEL2_ATTACK, jobs=jobs)


@dataclass
class EvasionResult:
    cv_report: EvalReport        # direct attacks + legitimate, out-of-fold
    obfuscated_tpr: float        # detection rate on held-out obfuscated attacks
    all_attacks_tpr: float       # direct (out-of-fold) + obfuscated combined
    n_obfuscated: int
    n_obfuscated_detected: int


def evasion_experiment(rows, feature_ids, classifier="nb", k=5, seed=0,
                       jobs=1) -> EvasionResult:
    """Train without obfuscated attacks, then predict them.

    CV runs on direct+legitimate rows; the final model trains on all of
    them and predicts the obfuscated rows.
    """
    make = resolve_classifier(classifier)
    y3 = three_class_labels(rows)
    keep = np.flatnonzero(y3 != 2)
    obf = np.flatnonzero(y3 == 2)
    if obf.size == 0:
        raise ExperimentError("dataset has no obfuscated attacks (label_3 == 2)")
    if keep.size == 0:
        raise ExperimentError("dataset has no direct/legitimate rows to train on")

    X = rows_to_matrix(rows, feature_ids)
    y_bin = np.asarray(
        [LABEL2_LEGIT if v == 3 else LABEL2_ATTACK for v in y3]
    )
    split = stratified_kfold(y_bin[keep], k, seed)
    cv_report = evaluate(X[keep], y_bin[keep], split, make,
                         positive=LABEL2_ATTACK, jobs=jobs)

    clf = make()
    clf.fit(X[keep], y_bin[keep])
    pred_obf = np.asarray(clf.predict(X[obf]))
    detected = int((pred_obf == LABEL2_ATTACK).sum())
    obf_tpr = detected / obf.size

    # combine out-of-fold hits on direct attacks with the obfuscated hits
    direct = np.flatnonzero(y3 == 1)
    direct_recall = cv_report.recall.get(LABEL2_ATTACK, 0.0)
    direct_detected = direct_recall * direct.size
    all_tpr = (direct_detected + detected) / (direct.size + obf.size)
    return EvasionResult(
        cv_report=cv_report,
        obfuscated_tpr=obf_tpr,
        all_attacks_tpr=all_tpr,
        n_obfuscated=int(obf.size),
        n_obfuscated_detected=detected,
    )


@dataclass
class AugmentationResult:
    report: EvalReport
    delta_tpr: float | None = None   # versus the evasion all-attacks baseline
    delta_fpr: float | None = None


def augmentation_experiment(
    rows, feature_ids, classifier="nb", k=5, seed=0, baseline=None, jobs=1
) -> AugmentationResult:
    """Whole-dataset CV with obfuscated attacks folded into the attack class.

    `baseline` is (all_attacks_tpr, fpr) from the evasion experiment; when
    omitted it is computed with the same features when the dataset carries
    obfuscated rows.
    """
    report = cv_experiment(rows, feature_ids, classifier=classifier, k=k,
                           seed=seed, jobs=jobs)
    if baseline is None:
        try:
            ev = evasion_experiment(rows, feature_ids, classifier=classifier,
                                    k=k, seed=seed, jobs=jobs)
            baseline = (ev.all_attacks_tpr, ev.cv_report.fpr)
        except ExperimentError:
            baseline = None
    if baseline is None:
        return AugmentationResult(report=report)
    return AugmentationResult(
        report=report,
        delta_tpr=report.tpr - baseline[0],
        delta_fpr=report.fpr - baseline[1],
    )
