"""Confusion-matrix metrics, multi-run aggregation and growth rates.

Precision, recall and F1 are one-vs-rest per class and macro-averaged over
the classes where they are defined. Undefined values are ``nan`` and are
left out of averages rather than counted as zero.

"Accuracy" and "Top1 Acc" are the same quantity for single-label
prediction; both names are emitted so reports line up with the usual
table layout.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field

import numpy as np

METRIC_NAMES = ("accuracy", "top1_accuracy", "precision_macro", "recall_macro", "f1_macro")
METRIC_LABELS = {
    "accuracy": "Accuracy",
    "top1_accuracy": "Top1 Acc",
    "precision_macro": "Precision",
    "recall_macro": "Recall",
    "f1_macro": "F1 Score",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # counts[actual, predicted]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    accuracy: float
    top1_accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    per_class: dict = field(default_factory=dict)
    undefined_classes: list = field(default_factory=list)
    confusion: ConfusionMatrix | None = None

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class AggregateReport:
    mean: dict
    std: dict
    n_runs: int
    n_defined: dict

    def excluded(self, metric: str) -> int:
        return self.n_runs - self.n_defined[metric]


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"y_true and y_pred differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("cannot build a confusion matrix from no samples")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"{name} has labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _ratio(num, den):
    return num / den if den > 0 else math.nan


def _nanmean(values):
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    counts = np.asarray(cm.counts)
    total = counts.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)  # TP + FP
    actual = counts.sum(axis=1)  # TP + FN
    per_class = {}
    undefined = []
    for k in range(counts.shape[0]):
        p = _ratio(tp[k], predicted[k])
        r = _ratio(tp[k], actual[k])
        if math.isnan(p) or math.isnan(r) or tp[k] == 0:
            f1 = math.nan
        else:
            # harmonic mean of p and r, as one integer division so it is correctly rounded
            f1 = 2 * tp[k] / (2 * tp[k] + (predicted[k] - tp[k]) + (actual[k] - tp[k]))
        if math.isnan(p):
            undefined.append(k)
        per_class[k] = {"precision": p, "recall": r, "f1": f1}
    acc = float(np.trace(counts) / total)
    return MetricsReport(
        accuracy=acc,
        top1_accuracy=acc,
        precision_macro=_nanmean(c["precision"] for c in per_class.values()),
        recall_macro=_nanmean(c["recall"] for c in per_class.values()),
        f1_macro=_nanmean(c["f1"] for c in per_class.values()),
        per_class=per_class,
        undefined_classes=undefined,
        confusion=cm,
    )


def aggregate(reports) -> AggregateReport:
    """Mean and sample standard deviation of every metric across runs."""
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("aggregation needs at least 2 reports")
    mean, std, n_defined = {}, {}, {}
    for name in METRIC_NAMES:
        vals = [float(getattr(r, name)) for r in reports]
        vals = [v for v in vals if not math.isnan(v)]
        n_defined[name] = len(vals)
        mean[name] = statistics.fmean(vals) if vals else math.nan
        std[name] = statistics.stdev(vals) if len(vals) >= 2 else math.nan
    return AggregateReport(mean, std, len(reports), n_defined)


def growth_rate(baseline: float, improved: float) -> float:
    """Relative improvement over ``baseline`` in percent, rounded to 2 decimals."""
    if not baseline > 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return round((improved - baseline) / baseline * 100.0, 2)


# --- export -----------------------------------------------------------------

def _fmt(x, digits=4):
    return "nan" if math.isnan(x) else f"{x:.{digits}f}"


def report_csv(reports: dict) -> str:
    """One row per (method, metric) for a mapping of name -> MetricsReport."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "metric", "value"])
    for method, rep in reports.items():
        for name in METRIC_NAMES:
            w.writerow([method, name, repr(getattr(rep, name))])
    return buf.getvalue()


def aggregate_csv(aggregates: dict, growth: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "metric", "mean", "std", "n_defined", "n_runs", "growth_rate"])
    for method, agg in aggregates.items():
        for name in METRIC_NAMES:
            g = (growth or {}).get(method, {}).get(name)
            w.writerow([method, name, repr(agg.mean[name]), repr(agg.std[name]),
                        agg.n_defined[name], agg.n_runs, "" if g is None else f"{g:.2f}"])
    return buf.getvalue()


def markdown_table(aggregates: dict, growth: dict | None = None, baseline: str | None = None) -> str:
    """Scores as rows, methods as columns, with a growth-rate column after each
    non-baseline method."""
    growth = growth or {}
    header = ["Score"]
    for method in aggregates:
        header.append(method)
        if method != baseline and method in growth:
            header.append("Growth Rate")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for name in METRIC_NAMES:
        row = [METRIC_LABELS[name]]
        for method, agg in aggregates.items():
            row.append(f"{_fmt(agg.mean[name], 3)} +- {_fmt(agg.std[name], 3)}")
            if method != baseline and method in growth:
                g = growth[method].get(name)
                row.append("nan" if g is None or math.isnan(g) else f"{g:.2f}")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def report_markdown(report: MetricsReport) -> str:
    lines = ["| Score | Value |", "|---|---|"]
    for name in METRIC_NAMES:
        lines.append(f"| {METRIC_LABELS[name]} | {_fmt(getattr(report, name))} |")
    if report.undefined_classes:
        lines.append(f"\nundefined precision for classes: {report.undefined_classes}")
    return "\n".join(lines) + "\n"
