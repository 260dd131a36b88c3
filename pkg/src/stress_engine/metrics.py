"""Confusion-matrix metrics and the two cross-validation protocols.

Metric values are computed with exact rational arithmetic over the counts
and converted to float at the boundary, so hand-derived closed forms match
exactly. Multi-class precision/recall/F1 use the one-vs-rest reading;
macro-F1 is the unweighted mean (accuracy alone is misleading on
imbalanced data).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    EmptyLog,
    EmptyMatrix,
    TooFewSamples,
    TooFewSubjects,
    UnknownClass,
)
from .prediction_log import PredictionLog

KFOLD = "kfold"
LOSO = "loso"


@dataclass
class ConfusionMatrix:
    """counts[i][j] = samples with true class i predicted as class j."""

    classes: list[str]
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        C = len(self.classes)
        if self.counts.shape != (C, C):
            raise ValueError(f"counts must be {C}x{C}")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, label: str) -> tuple[int, int, int, int]:
        """(TP, FP, FN, TN) for one class against the rest."""
        if label not in self.classes:
            raise UnknownClass(f"class {label!r} not in {self.classes}")
        i = self.classes.index(label)
        tp = int(self.counts[i, i])
        fp = int(self.counts[:, i].sum()) - tp
        fn = int(self.counts[i, :].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn


def confusion(log: PredictionLog) -> ConfusionMatrix:
    if not log.entries:
        raise EmptyLog("prediction log has no entries")
    C = len(log.class_labels)
    counts = np.zeros((C, C), dtype=np.int64)
    for e in log.entries:
        if e.true_label not in log.class_labels:
            raise UnknownClass(f"true label {e.true_label!r} outside class set")
        counts[log.class_index(e.true_label), log.class_index(e.predicted_label)] += 1
    return ConfusionMatrix(list(log.class_labels), counts)


def accuracy(m: ConfusionMatrix) -> float:
    """trace/total; equals (TP+TN)/(TP+FN+TN+FP) in the binary case."""
    if m.total == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    return float(Fraction(int(np.trace(m.counts)), m.total))


def precision_recall_f1(m: ConfusionMatrix, label: str) -> tuple[float, float, float]:
    """One-vs-rest precision, recall, F1; zero-denominator cases yield 0."""
    if m.total == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    tp, fp, fn, _ = m.one_vs_rest(label)
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return float(p), float(r), float(f1)


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[str, dict[str, float]]
    macro_f1: float

    def to_json(self) -> dict:
        return {"accuracy": self.accuracy, "macro_f1": self.macro_f1,
                "per_class": self.per_class}


def metrics_report(m: ConfusionMatrix) -> MetricsReport:
    per_class = {}
    f1s = []
    for i, label in enumerate(m.classes):
        p, r, f1 = precision_recall_f1(m, label)
        per_class[label] = {"precision": p, "recall": r, "f1": f1,
                            "support": int(m.counts[i, :].sum())}
        f1s.append(Fraction(f1))
    macro = float(sum(f1s) / len(f1s))
    return MetricsReport(accuracy(m), per_class, macro)


# ---------------------------------------------------------------------------
# Cross-validation folds
# ---------------------------------------------------------------------------

@dataclass
class FoldSpec:
    """KFold(k, seed) or leave-one-subject-out."""

    scheme: str
    k: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in (KFOLD, LOSO):
            raise ValueError(f"unknown CV scheme {self.scheme!r}")
        if self.scheme == KFOLD and self.k < 2:
            raise ValueError("kfold requires k >= 2")

    @property
    def label(self) -> str:
        return f"kfold:{self.k}" if self.scheme == KFOLD else "loso"

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "FoldSpec":
        if text == LOSO:
            return cls(LOSO, seed=seed)
        if text.startswith("kfold:"):
            return cls(KFOLD, k=int(text.split(":", 1)[1]), seed=seed)
        raise ValueError(f"cannot parse CV scheme {text!r} (kfold:K or loso)")


def fold_assignments(dataset, spec: FoldSpec) -> np.ndarray:
    """sample index -> fold index; folds partition the dataset."""
    n = len(dataset)
    if spec.scheme == KFOLD:
        if spec.k > n:
            raise TooFewSamples(f"k={spec.k} exceeds dataset size {n}")
        perm = np.random.default_rng(spec.seed).permutation(n)
        assign = np.empty(n, dtype=np.int64)
        sizes = [n // spec.k + (1 if i < n % spec.k else 0) for i in range(spec.k)]
        lo = 0
        for fold, size in enumerate(sizes):
            assign[perm[lo: lo + size]] = fold
            lo += size
        return assign
    subjects = dataset.subjects
    if len(subjects) < 2:
        raise TooFewSubjects("leave-one-subject-out requires >= 2 subjects")
    fold_of = {s: i for i, s in enumerate(subjects)}
    return np.array([fold_of[w.subject_id] for w in dataset.windows], dtype=np.int64)


def split(dataset, spec: FoldSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train indices, test indices) per fold; disjoint and exhaustive."""
    assign = fold_assignments(dataset, spec)
    n_folds = int(assign.max()) + 1
    folds = []
    covered = 0
    for f in range(n_folds):
        test = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        if test.size == 0:
            raise ValueError(f"fold {f} is empty")
        covered += test.size
        folds.append((train, test))
    assert covered == len(dataset), "folds must partition the dataset"
    return folds


# ---------------------------------------------------------------------------
# Cross-validated evaluation
# ---------------------------------------------------------------------------

@dataclass
class CvSummary:
    scheme: str
    per_fold: list[MetricsReport]
    mean_accuracy: float
    std_accuracy: float
    mean_macro_f1: float
    std_macro_f1: float

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "per_fold": [r.to_json() for r in self.per_fold],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_macro_f1": self.mean_macro_f1,
            "std_macro_f1": self.std_macro_f1,
        }


def summarize_folds(scheme: str, reports: list[MetricsReport]) -> CvSummary:
    accs = np.array([r.accuracy for r in reports])
    f1s = np.array([r.macro_f1 for r in reports])
    std = (lambda v: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
    return CvSummary(scheme, reports,
                     float(accs.mean()), std(accs),
                     float(f1s.mean()), std(f1s))


def evaluate_cv(dataset, spec: FoldSpec, train_cfg, mode: str,
                arch: dict | None = None) -> tuple[CvSummary, PredictionLog]:
    """Train a fresh model per fold, score its held-out split, and emit the
    concatenated held-out prediction log for the fusion stage.

    Protocol mapping is enforced: generalized emotion classification pairs
    with LOSO, personalized with k-fold; subject identification uses k-fold
    with a generalized-mode model (identity is the target, not an input).
    """
    from .tcn.model import GENERAL, PERSONAL, ModelConfig, build_model
    from .tcn.training import TASK_IDENTIFY, predict_log, train

    task = train_cfg.task
    if task == TASK_IDENTIFY:
        if spec.scheme != KFOLD:
            raise ValueError("identification uses k-fold cross-validation")
        if mode != GENERAL:
            raise ValueError("identification requires generalized mode")
        targets = dataset.subjects
    else:
        if mode == GENERAL and spec.scheme != LOSO:
            raise ValueError("generalized emotion classification pairs with LOSO")
        if mode == PERSONAL and spec.scheme != KFOLD:
            raise ValueError("personalized emotion classification pairs with k-fold")
        targets = dataset.class_scheme.labels

    arch = dict(arch or {})
    subjects = dataset.subjects if mode == PERSONAL else []
    reports: list[MetricsReport] = []
    all_entries = []
    for f, (tr, te) in enumerate(split(dataset, spec)):
        cfg = ModelConfig(in_channels=dataset.channels,
                          window_len=dataset.window_len,
                          targets=list(targets), mode=mode,
                          subjects=list(subjects), **arch)
        model = build_model(cfg, seed=train_cfg.seed + f)
        train(model, dataset.subset(tr), train_cfg)
        fold_log = predict_log(model, dataset.subset(te), task)
        reports.append(metrics_report(confusion(fold_log)))
        all_entries.extend(fold_log.entries)

    summary = summarize_folds(spec.label, reports)
    all_entries.sort(key=lambda e: (e.subject_id, int(e.sample_id.rsplit(":", 1)[1])))
    return summary, PredictionLog(list(targets), all_entries)
