"""Cross-validated evaluation: confusion matrix, per-class measures, ROC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ExperimentError

POSITIVE = "attack"


@dataclass
class EvalReport:
    classes: list
    matrix: np.ndarray            # rows true class, columns predicted
    accuracy: float
    accuracy_std: float
    precision: dict
    recall: dict
    f1_positive: float
    tpr: float
    fpr: float
    positive: str
    fold_accuracies: list = field(default_factory=list)
    roc: list = field(default_factory=list)  # (threshold, tpr, fpr)

    def to_kv_lines(self):
        lines = [
            "accuracy=%.6f" % self.accuracy,
            "accuracy_std=%.6f" % self.accuracy_std,
            "f1_%s=%.6f" % (self.positive, self.f1_positive),
            "tpr=%.6f" % self.tpr,
            "fpr=%.6f" % self.fpr,
        ]
        for i, true_cls in enumerate(self.classes):
            for j, pred_cls in enumerate(self.classes):
                lines.append(
                    "confusion.%s.%s=%d" % (true_cls, pred_cls, self.matrix[i, j])
                )
            lines.append("precision.%s=%.6f" % (true_cls, self.precision[true_cls]))
            lines.append("recall.%s=%.6f" % (true_cls, self.recall[true_cls]))
        return lines

    def to_text(self):
        width = max(len(str(c)) for c in self.classes) + 2
        head = " " * width + "".join(str(c).rjust(width) for c in self.classes)
        rows = [head]
        for i, cls in enumerate(self.classes):
            rows.append(
                str(cls).rjust(width)
                + "".join(str(int(v)).rjust(width) for v in self.matrix[i])
            )
        rows.append(
            "accuracy %.2f%% +- %.2f  f1(%s) %.2f%%  tpr %.2f%%  fpr %.2f%%"
            % (
                100 * self.accuracy,
                100 * self.accuracy_std,
                self.positive,
                100 * self.f1_positive,
                100 * self.tpr,
                100 * self.fpr,
            )
        )
        return "\n".join(rows)

    def roc_csv_lines(self):
        lines = ["threshold,tpr,fpr"]
        lines += ["%r,%.6f,%.6f" % point for point in self.roc]
        return lines


def confusion_report(y_true, y_pred, scores=None, positive=POSITIVE,
                     fold_accuracies=()) -> EvalReport:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    classes = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    index = {c: i for i, c in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        matrix[index[t], index[p]] += 1

    precision = {}
    recall = {}
    for c in classes:
        i = index[c]
        col = matrix[:, i].sum()
        row = matrix[i, :].sum()
        precision[c] = matrix[i, i] / col if col else 0.0
        recall[c] = matrix[i, i] / row if row else 0.0

    if positive in index:
        p, r = precision[positive], recall[positive]
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        tpr = r
        i = index[positive]
        negatives = matrix.sum() - matrix[i, :].sum()
        false_pos = matrix[:, i].sum() - matrix[i, i]
        fpr = false_pos / negatives if negatives else 0.0
    else:
        f1 = tpr = fpr = 0.0

    fold_accuracies = list(fold_accuracies)
    accuracy = float(np.trace(matrix) / matrix.sum())
    acc_std = float(np.std(fold_accuracies, ddof=1)) if len(fold_accuracies) > 1 else 0.0

    report = EvalReport(
        classes=classes,
        matrix=matrix,
        accuracy=accuracy,
        accuracy_std=acc_std,
        precision=precision,
        recall=recall,
        f1_positive=f1,
        tpr=tpr,
        fpr=fpr,
        positive=positive,
        fold_accuracies=fold_accuracies,
    )
    if scores is not None:
        report.roc = roc_points(y_true, np.asarray(scores), positive)
    return report


def roc_points(y_true, scores, positive=POSITIVE):
    """(threshold, tpr, fpr) for every distinct score, predicting positive
    at score >= threshold; sorted by rising threshold."""
    y_true = np.asarray(y_true)
    is_pos = y_true == positive
    n_pos = int(is_pos.sum())
    n_neg = int((~is_pos).sum())
    points = []
    for thr in np.unique(scores):
        called = scores >= thr
        tp = int((called & is_pos).sum())
        fp = int((called & ~is_pos).sum())
        points.append(
            (float(thr), tp / n_pos if n_pos else 0.0, fp / n_neg if n_neg else 0.0)
        )
    return points


def evaluate(X, y, split, make_classifier, positive=POSITIVE, jobs=1) -> EvalReport:
    """Out-of-fold predictions over every fold, aggregated into one report.

    Folds are independent; `jobs` > 1 runs them on a thread pool (results
    land in disjoint index ranges, so the report is identical either way).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    preds = np.empty(y.shape, dtype=object)
    scores = np.zeros(y.shape[0])

    def run_fold(fold):
        train, test = split.fold_indices(fold)
        if test.size == 0:
            return fold, None
        if len(set(y[train].tolist())) < 2:
            raise ExperimentError("fold %d training data has a single class" % fold)
        clf = make_classifier()
        clf.fit(X[train], y[train])
        fold_pred = clf.predict(X[test])
        preds[test] = fold_pred
        scores[test] = clf.score(X[test], positive)
        return fold, float(np.mean([p == t for p, t in zip(fold_pred, y[test])]))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, range(split.k)))
    else:
        results = [run_fold(fold) for fold in range(split.k)]
    fold_accuracies = [acc for _, acc in sorted(results) if acc is not None]
    return confusion_report(
        y, preds, scores=scores, positive=positive, fold_accuracies=fold_accuracies
    )
