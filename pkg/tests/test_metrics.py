import math
from fractions import Fraction

import numpy as np
import pytest

from labelnoise import metrics as M


def counting_oracle(y_true, y_pred, n_classes):
    """Per-class precision/recall/F1 from explicit TP/FP/FN tallies over samples."""
    out = {}
    for k in range(n_classes):
        tp = fp = fn = 0
        for t, p in zip(y_true, y_pred):
            if p == k and t == k:
                tp += 1
            elif p == k:
                fp += 1
            elif t == k:
                fn += 1
        prec = Fraction(tp, tp + fp) if tp + fp else None
        rec = Fraction(tp, tp + fn) if tp + fn else None
        f1 = None if prec is None or rec is None or prec + rec == 0 else 2 * prec * rec / (prec + rec)
        out[k] = (prec, rec, f1)
    return out


def _macro(values):
    vals = [float(v) for v in values if v is not None]
    return sum(vals) / len(vals) if vals else math.nan


def test_confusion_examples():
    cm = M.confusion([0, 0, 1], [0, 1, 1], 2)
    np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])
    assert cm.total == 3
    y = [2, 0, 1, 1]
    assert not (M.confusion(y, y, 3).counts - np.diag([1, 2, 1])).any()


@pytest.mark.parametrize("args", [([], [], 3), ([0, 1], [0], 3), ([0, 3], [0, 1], 3)])
def test_confusion_errors(args):
    with pytest.raises(ValueError):
        M.confusion(*args)


def test_all_correct():
    rep = M.compute_metrics(M.confusion([0, 1, 2, 2], [0, 1, 2, 2], 3))
    assert rep.accuracy == rep.precision_macro == rep.recall_macro == rep.f1_macro == 1.0
    assert rep.undefined_classes == []


def test_binary_example():
    # class 1 is the positive class: TP=2, FP=1, FN=1, TN=6
    rep = M.compute_metrics(M.ConfusionMatrix(np.array([[6, 1], [1, 2]])))
    pc = rep.per_class[1]
    assert pc["precision"] == pytest.approx(2 / 3) and pc["recall"] == pytest.approx(2 / 3)
    assert pc["f1"] == pytest.approx(2 / 3)


def test_single_class_predictor_has_undefined_precision():
    y = np.repeat([0, 1, 2], 5)
    rep = M.compute_metrics(M.confusion(y, np.zeros(15, int), 3))
    assert rep.undefined_classes == [1, 2]
    assert rep.per_class[0]["recall"] == 1.0
    assert math.isnan(rep.per_class[1]["precision"])
    assert rep.precision_macro == pytest.approx(1 / 3)
    assert rep.accuracy == rep.top1_accuracy == pytest.approx(1 / 3)


def test_randomized_against_counting_oracle():
    rng = np.random.default_rng(77)
    for _ in range(20):
        c = int(rng.integers(2, 6))
        n = int(rng.integers(5, 40))
        y_true = rng.integers(0, c, n)
        y_pred = np.where(rng.random(n) < 0.5, y_true, rng.integers(0, c, n))
        rep = M.compute_metrics(M.confusion(y_true, y_pred, c))
        oracle = counting_oracle(y_true.tolist(), y_pred.tolist(), c)
        for k, (p, r, f) in oracle.items():
            for name, v in (("precision", p), ("recall", r), ("f1", f)):
                got = rep.per_class[k][name]
                assert math.isnan(got) if v is None else got == float(v), (k, name)
        for name, idx in (("precision_macro", 0), ("recall_macro", 1), ("f1_macro", 2)):
            expected = _macro(v[idx] for v in oracle.values())
            assert getattr(rep, name) == pytest.approx(expected, rel=1e-15, nan_ok=True)
        assert rep.accuracy == np.count_nonzero(y_true == y_pred) / n


def test_metrics_invariant_to_sample_order(rng):
    y = rng.integers(0, 4, 60)
    p = rng.integers(0, 4, 60)
    perm = rng.permutation(60)
    a = M.compute_metrics(M.confusion(y, p, 4)).as_dict()
    b = M.compute_metrics(M.confusion(y[perm], p[perm], 4)).as_dict()
    assert a == b


def test_balanced_macro_recall_equals_accuracy(rng):
    y = np.repeat(np.arange(3), 20)
    p = np.where(rng.random(60) < 0.6, y, rng.integers(0, 3, 60))
    rep = M.compute_metrics(M.confusion(y, p, 3))
    assert rep.recall_macro == pytest.approx(rep.accuracy, abs=1e-15)


def test_empty_matrix_rejected():
    with pytest.raises(ValueError):
        M.compute_metrics(M.ConfusionMatrix(np.zeros((2, 2), int)))


def _report(acc, prec=0.5):
    return M.MetricsReport(acc, acc, prec, 0.5, 0.5)


def test_aggregate_examples():
    agg = M.aggregate([_report(0.8), _report(0.9)])
    assert agg.mean["accuracy"] == pytest.approx(0.85)
    assert agg.std["accuracy"] == pytest.approx(0.0707106781, abs=1e-9)
    same = M.aggregate([_report(0.7)] * 3)
    assert same.std["accuracy"] == 0.0


def test_aggregate_excludes_undefined():
    reports = [_report(0.8, 0.6) for _ in range(9)] + [_report(0.8, math.nan)]
    agg = M.aggregate(reports)
    assert agg.mean["precision_macro"] == pytest.approx(0.6)
    assert agg.n_defined["precision_macro"] == 9 and agg.excluded("precision_macro") == 1
    with pytest.raises(ValueError):
        M.aggregate([_report(0.8)])


def test_growth_rate():
    assert M.growth_rate(0.835, 0.892) == 6.83
    assert 6.72 <= M.growth_rate(0.835, 0.892) <= 6.92
    assert M.growth_rate(0.4, 0.4) == 0.0
    assert M.growth_rate(0.5, 0.6) == 20.0
    with pytest.raises(ValueError):
        M.growth_rate(0.0, 0.5)


def test_exports():
    aggs = {"ce_baseline": M.aggregate([_report(0.8), _report(0.9)]),
            "backward": M.aggregate([_report(0.9), _report(0.95)])}
    growth = {"backward": {"accuracy": M.growth_rate(0.85, 0.925)}}
    csv_text = M.aggregate_csv(aggs, growth)
    assert csv_text.splitlines()[0] == "method,metric,mean,std,n_defined,n_runs,growth_rate"
    assert "backward,accuracy," in csv_text and ",8.82" in csv_text
    md = M.markdown_table(aggs, growth, baseline="ce_baseline")
    assert md.splitlines()[0] == "| Score | ce_baseline | backward | Growth Rate |"
    assert "| Top1 Acc |" in md
    assert "| Accuracy | 0.8000 |" in M.report_markdown(_report(0.8))
