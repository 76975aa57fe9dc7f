"""Confusion-based metrics, probability thresholding, ROC curves, and k-fold evaluation.

The cross-validation loop is the one place where train/test hygiene is
enforced: the investor index, the PCA basis, and the class balancing are all
rebuilt from the nine training folds, never from the held-out fold.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .domain import BinaryLabel, CompanyRecord, LabelMapping, aggregate_label
from .features import build_investor_index, featurize_all
from .pca import pca_fit, pca_transform
from .sampling import FoldAssignment, balance, kfold

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "ROCCurve",
    "CVResult",
    "ClassifierSpec",
    "DEFAULT_GAMMA_GRID",
    "threshold_label",
    "threshold_labels",
    "confusion",
    "metrics",
    "roc",
    "knee",
    "average_reports",
    "cross_validate",
    "pooled_report",
    "write_metrics_csv",
    "read_metrics_csv",
    "write_roc_csv",
    "read_roc_csv",
]

METRIC_FIELDS = ("prec_pos", "recl_pos", "prec_neg", "recl_neg", "accuracy")

# Finest grid consistent with the usual legend steps on the ROC plots.
DEFAULT_GAMMA_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def threshold_label(p: float, gamma: float) -> BinaryLabel:
    """Positive iff the probability strictly exceeds the threshold."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    return BinaryLabel.POSITIVE if p > gamma else BinaryLabel.NEGATIVE


def threshold_labels(probs: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorized strict thresholding to 0/1 labels."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    return (np.asarray(probs) > gamma).astype(np.int64)


def confusion(truths: np.ndarray, preds: np.ndarray) -> ConfusionCounts:
    """Count the four cells from aligned 0/1 truth and prediction arrays."""
    truths = np.asarray(truths)
    preds = np.asarray(preds)
    if truths.shape != preds.shape:
        raise ValueError("truths and predictions must align")
    tp = int(((truths == 1) & (preds == 1)).sum())
    fp = int(((truths == 0) & (preds == 1)).sum())
    tn = int(((truths == 0) & (preds == 0)).sum())
    fn = int(((truths == 1) & (preds == 0)).sum())
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class MetricsReport:
    """The five indicators; None marks a metric whose denominator was zero."""

    prec_pos: float | None
    recl_pos: float | None
    prec_neg: float | None
    recl_neg: float | None
    accuracy: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


def metrics(c: ConfusionCounts) -> MetricsReport:
    """Precision/recall for both classes plus accuracy, never dividing by zero."""
    if c.total < 1:
        raise ValueError("metrics need at least one prediction")

    def ratio(num: int, den: int) -> float | None:
        return num / den if den else None

    return MetricsReport(
        prec_pos=ratio(c.tp, c.tp + c.fp),
        recl_pos=ratio(c.tp, c.tp + c.fn),
        prec_neg=ratio(c.tn, c.tn + c.fn),
        recl_neg=ratio(c.tn, c.tn + c.fp),
        accuracy=(c.tp + c.tn) / c.total,
    )


@dataclass(frozen=True)
class ROCCurve:
    """(gamma, fpr, tpr) triples over a strictly increasing threshold grid."""

    gammas: np.ndarray
    fprs: np.ndarray
    tprs: np.ndarray

    def __len__(self) -> int:
        return len(self.gammas)


def roc(
    probs: np.ndarray,
    truths: np.ndarray,
    gamma_grid: Sequence[float] | None = None,
) -> ROCCurve:
    """False/true positive rates at every threshold on the grid."""
    probs = np.asarray(probs, dtype=float)
    truths = np.asarray(truths)
    if len(probs) != len(truths) or len(probs) == 0:
        raise ValueError("probs and truths must align and be nonempty")
    grid = np.asarray(gamma_grid if gamma_grid is not None else DEFAULT_GAMMA_GRID, dtype=float)
    if len(grid) == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("gamma grid must be nonempty and strictly increasing")
    n_pos = int((truths == 1).sum())
    n_neg = len(truths) - n_pos
    fprs = np.empty(len(grid))
    tprs = np.empty(len(grid))
    for i, g in enumerate(grid):
        pred_pos = probs > g
        tp = int((pred_pos & (truths == 1)).sum())
        fp = int((pred_pos & (truths == 0)).sum())
        tprs[i] = tp / n_pos if n_pos else 0.0
        fprs[i] = fp / n_neg if n_neg else 0.0
    return ROCCurve(gammas=grid, fprs=fprs, tprs=tprs)


def knee(curve: ROCCurve) -> float:
    """Threshold with the best TPR-minus-FPR tradeoff; ties go to the larger gamma."""
    if len(curve) == 0:
        raise ValueError("cannot pick a knee from an empty curve")
    j = curve.tprs - curve.fprs
    best = 0
    for i in range(1, len(curve)):
        if j[i] >= j[best]:
            best = i
    return float(curve.gammas[best])


def average_reports(
    reports: Sequence[MetricsReport],
) -> tuple[MetricsReport, dict[str, int]]:
    """Unweighted mean of the defined values per metric, plus exclusion counts."""
    if not reports:
        raise ValueError("nothing to average")
    means: dict[str, float | None] = {}
    excluded: dict[str, int] = {}
    for name in METRIC_FIELDS:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        excluded[name] = len(reports) - len(values)
        means[name] = float(np.mean(values)) if values else None
    return MetricsReport(**means), excluded


class ClassifierSpec(Protocol):
    """What cross_validate needs from a component: a name, preprocessing
    choices, and fit/predict entry points."""

    name: str
    pca_components: int | None
    max_train: int | None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int): ...

    def predict_prob(self, model, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class CVResult:
    """Averaged metrics plus everything needed to re-threshold without refitting."""

    mean_report: MetricsReport
    fold_reports: tuple[MetricsReport, ...]
    excluded: dict[str, int]
    oof_probs: np.ndarray
    truths: np.ndarray
    folds: FoldAssignment
    gamma: float
    skipped_folds: tuple[int, ...]


def _fold_seed(seed: int, fold: int, purpose: int) -> int:
    """Stable per-(fold, purpose) stream so parallel and serial runs agree."""
    return int(np.random.SeedSequence([seed, fold, purpose]).generate_state(1)[0])


def fit_fold(
    records: Sequence[CompanyRecord],
    y: np.ndarray,
    folds: FoldAssignment,
    fold: int,
    spec: ClassifierSpec,
    seed: int,
) -> np.ndarray | None:
    """Fit one component on one training split and score its held-out fold.

    Returns the held-out probabilities, or None when the training split is
    single-class.  All fitted artifacts (index, PCA, balancing, model) are
    derived from the training folds only.
    """
    tr = folds.train_indices(fold)
    te = folds.test_indices(fold)
    if len(np.unique(y[tr])) < 2:
        return None

    train_records = [records[i] for i in tr]
    index = build_investor_index(train_records)
    X_train = featurize_all(train_records, index)
    X_test = featurize_all([records[i] for i in te], index)
    if spec.pca_components is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # constant columns are routine here
            pca = pca_fit(X_train, standardize=True)
        X_train = pca_transform(pca, X_train, spec.pca_components)
        X_test = pca_transform(pca, X_test, spec.pca_components)

    local = balance(np.arange(len(tr)), y[tr], _fold_seed(seed, fold, 0))
    if spec.max_train is not None and len(local) > spec.max_train:
        rng = np.random.default_rng(_fold_seed(seed, fold, 1))
        local = rng.choice(local, size=spec.max_train, replace=False)
    model = spec.fit(X_train[local], y[tr][local], _fold_seed(seed, fold, 2))
    return np.asarray(spec.predict_prob(model, X_test), dtype=float)


def cross_validate(
    records: Sequence[CompanyRecord],
    classifier_spec: ClassifierSpec,
    gamma: float,
    k: int = 10,
    seed: int = 0,
    mapping: LabelMapping | None = None,
) -> CVResult:
    """k-fold evaluation of one component at a fixed threshold.

    Per fold: rebuild the investor index and (optionally) the PCA basis on
    the training folds, rebalance the training classes, fit, and score the
    held-out fold.  The final report is the unweighted mean of the defined
    per-fold values; single-class training folds are skipped with a
    diagnostic, and it is an error for every fold to skip.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    mapping = mapping or LabelMapping()
    y = np.array([int(aggregate_label(r.exit, mapping)) for r in records], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("records are single-class overall")
    folds = kfold(len(records), k, seed)

    oof = np.full(len(records), np.nan)
    fold_reports: list[MetricsReport] = []
    skipped: list[int] = []
    for fold in range(k):
        probs = fit_fold(records, y, folds, fold, classifier_spec, seed)
        if probs is None:
            warnings.warn(f"fold {fold} skipped: single-class training split", stacklevel=2)
            skipped.append(fold)
            continue
        te = folds.test_indices(fold)
        oof[te] = probs
        fold_reports.append(metrics(confusion(y[te], threshold_labels(probs, gamma))))
    if not fold_reports:
        raise ValueError("every fold was skipped; cannot evaluate")

    mean_report, excluded = average_reports(fold_reports)
    return CVResult(
        mean_report=mean_report,
        fold_reports=tuple(fold_reports),
        excluded=excluded,
        oof_probs=oof,
        truths=y,
        folds=folds,
        gamma=gamma,
        skipped_folds=tuple(skipped),
    )


def pooled_report(result: CVResult, gamma: float | None = None) -> MetricsReport:
    """Metrics from confusion counts pooled over all scored records."""
    g = result.gamma if gamma is None else gamma
    scored = ~np.isnan(result.oof_probs)
    return metrics(
        confusion(result.truths[scored], threshold_labels(result.oof_probs[scored], g))
    )


def _format_metric(v: float | None) -> str:
    return "NA" if v is None else repr(float(v))


def _parse_metric(s: str) -> float | None:
    return None if s == "NA" else float(s)


def write_metrics_csv(path, rows: Sequence[tuple[str, MetricsReport, float]]) -> None:
    """Write per-sector metric rows: sector label, the five metrics, gamma."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sector"] + list(METRIC_FIELDS) + ["gamma"])
        for sector, report, gamma in rows:
            writer.writerow(
                [sector]
                + [_format_metric(getattr(report, name)) for name in METRIC_FIELDS]
                + [repr(float(gamma))]
            )


def read_metrics_csv(path) -> list[tuple[str, MetricsReport, float]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["sector"] + list(METRIC_FIELDS) + ["gamma"]:
            raise ValueError(f"unexpected metrics CSV header: {header}")
        out = []
        for row in reader:
            report = MetricsReport(**{n: _parse_metric(v) for n, v in zip(METRIC_FIELDS, row[1:6])})
            out.append((row[0], report, float(row[6])))
    return out


def write_roc_csv(path, curve: ROCCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "fpr", "tpr"])
        for g, fpr, tpr in zip(curve.gammas, curve.fprs, curve.tprs):
            writer.writerow([repr(float(g)), repr(float(fpr)), repr(float(tpr))])


def read_roc_csv(path) -> ROCCurve:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["gamma", "fpr", "tpr"]:
            raise ValueError(f"unexpected ROC CSV header: {header}")
        rows = [[float(v) for v in row] for row in reader]
    arr = np.asarray(rows) if rows else np.zeros((0, 3))
    return ROCCurve(gammas=arr[:, 0], fprs=arr[:, 1], tprs=arr[:, 2])
