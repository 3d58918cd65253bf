"""Repeated-holdout comparison of the baseline and the two loss corrections."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import data, metrics, noise_model
from ..estimation import estimate_transition
from ..losses import LossSpec
from ..nn import TrainConfig, build, train
from .config import METHOD_LOSS, ExperimentConfig

log = logging.getLogger(__name__)

TEST_SEED_OFFSET = 1_000_003
BASELINE = "ce_baseline"


class ExperimentError(RuntimeError):
    pass


@dataclass
class RunRecord:
    run: int
    seed: int
    n_flipped: int
    metrics: dict  # method -> MetricsReport.as_dict()
    undefined_classes: dict
    estimated_t: list | None = None
    estimate_mse: float | None = None
    condition_number: float | None = None
    epochs: dict = field(default_factory=dict)
    wall_clock: float = 0.0


@dataclass
class ExperimentResult:
    config: dict
    aggregates: dict  # method -> AggregateReport
    growth: dict  # method -> metric -> percent
    runs: list
    estimated_t: list | None = None
    estimate_mse: float | None = None
    condition_number: float | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "aggregates": {
                m: {"mean": a.mean, "std": a.std, "n_runs": a.n_runs, "n_defined": a.n_defined}
                for m, a in self.aggregates.items()
            },
            "growth": self.growth,
            "estimated_t": self.estimated_t,
            "estimate_mse": self.estimate_mse,
            "condition_number": self.condition_number,
            "runs": [r.__dict__ for r in self.runs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        aggs = {
            m: metrics.AggregateReport(a["mean"], a["std"], a["n_runs"], a["n_defined"])
            for m, a in d["aggregates"].items()
        }
        return cls(d["config"], aggs, d["growth"], [RunRecord(**r) for r in d["runs"]],
                   d.get("estimated_t"), d.get("estimate_mse"), d.get("condition_number"))

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        return metrics.aggregate_csv(self.aggregates, self.growth)

    def to_markdown(self) -> str:
        baseline = BASELINE if BASELINE in self.aggregates else None
        out = [metrics.markdown_table(self.aggregates, self.growth, baseline)]
        if self.estimated_t is not None:
            out.append("\nEstimated transition matrix (mean over runs):\n")
            out += [" ".join(f"{v:.6f}" for v in row) + "\n" for row in self.estimated_t]
            out.append(f"\ncondition number: {self.condition_number:.6g}\n")
            if self.estimate_mse is not None:
                out.append(f"MSE vs. true matrix: {self.estimate_mse!r}\n")
        return "".join(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def aggregate_runs(reports: list) -> metrics.AggregateReport:
    if len(reports) >= 2:
        return metrics.aggregate(reports)
    only = reports[0]
    return metrics.AggregateReport(
        mean={k: float(v) for k, v in only.as_dict().items()},
        std={k: math.nan for k in metrics.METRIC_NAMES},
        n_runs=1,
        n_defined={k: int(not math.isnan(v)) for k, v in only.as_dict().items()},
    )


def growth_rates(aggregates: dict) -> dict:
    """Growth of every non-baseline method's mean over the baseline's, per metric."""
    if BASELINE not in aggregates:
        return {}
    base = aggregates[BASELINE].mean
    out = {}
    for method, agg in aggregates.items():
        if method == BASELINE:
            continue
        out[method] = {
            name: (metrics.growth_rate(base[name], agg.mean[name])
                   if base[name] > 0 and not math.isnan(agg.mean[name]) else math.nan)
            for name in metrics.METRIC_NAMES
        }
    return out


def _prepare(images, normalization: bool) -> np.ndarray:
    raw = data.to_raw(images)
    return data.normalize(raw) if normalization else raw.astype(np.float64)


def load_run_data(config: ExperimentConfig, seed: int):
    """Clean training pool and clean test set for one run."""
    if config.is_file_dataset:
        pool = data.load(config.dataset["train_file"])
        test = data.load(config.dataset["test_file"])
        if test.label_quality != "clean":
            raise ExperimentError("the test file must carry clean labels")
        return pool, test
    pool = data.generate_synthetic(config.synthetic_spec(), seed, "train")
    test = data.generate_synthetic(config.synthetic_spec(test=True), seed + TEST_SEED_OFFSET, "test")
    return pool, test


@dataclass
class RunData:
    seed: int
    parts: data.SplitPair  # noisy training pool split into train / validation
    test: data.LabeledDataset  # clean
    injected: noise_model.TransitionMatrix
    n_flipped: int


def prepare_run(config: ExperimentConfig, run: int) -> RunData:
    """Load or generate the data for one run, corrupt the training labels and split."""
    seed = config.base_seed + run
    pool, test = load_run_data(config, seed)
    clean_test_labels = test.labels.copy()
    c = pool.n_classes
    source = config.noise if config.noise != "estimate" else config.hidden_noise
    injected = noise_model.resolve(source, c)
    if injected.n_classes != c:
        raise ExperimentError(f"{injected.n_classes}-class noise for a {c}-class dataset")

    # labels of the training pool are corrupted; the test set never is
    noisy, record = noise_model.inject_noise(pool.labels, injected, seed)
    pool = data.LabeledDataset(_prepare(pool.images, config.normalization), noisy, c, "noisy", pool.name)
    test = data.LabeledDataset(_prepare(test.images, config.normalization), test.labels, c, "clean", test.name)
    if not np.array_equal(test.labels, clean_test_labels):
        raise ExperimentError("test labels changed during noise injection")
    parts = data.split(pool, 1.0 - config.train.val_fraction, seed)
    return RunData(seed, parts, test, injected, record.n_flipped)


def _train_config(config: ExperimentConfig, seed: int, loss_kind: str, max_epochs=None) -> TrainConfig:
    s = config.train
    return TrainConfig(batch_size=s.batch_size, max_epochs=max_epochs or s.max_epochs,
                       patience=s.patience, seed=seed, val_fraction=s.val_fraction,
                       loss_kind=loss_kind, learning_rate=s.learning_rate)


def fit_estimator(config: ExperimentConfig, rd: RunData, truth=None):
    """Train the auxiliary cross-entropy model on noisy labels and estimate T from it.

    Returns ``(EstimationReport, epochs_trained)``.
    """
    train_set = rd.parts.train
    aux = build("small_cnn", train_set.image_shape, train_set.n_classes, rd.seed)
    epochs = min(config.estimator_epochs, config.train.max_epochs)
    aux, hist = train(aux, train_set, rd.parts.val, LossSpec("cross_entropy"),
                      _train_config(config, rd.seed, "cross_entropy", epochs))
    report = estimate_transition(aux, train_set.images, train_set.labels, train_set.n_classes,
                                 truth=truth)
    return report, len(hist)


def run_once(config: ExperimentConfig, run: int) -> RunRecord:
    t0 = time.perf_counter()
    rd = prepare_run(config, run)
    known_t = config.noise != "estimate"
    c = rd.test.n_classes
    rec = RunRecord(run=run, seed=rd.seed, n_flipped=rd.n_flipped, metrics={},
                    undefined_classes={})
    correction_t = rd.injected
    if not known_t or config.estimate_t:
        est, n_epochs = fit_estimator(config, rd, truth=rd.injected if known_t else None)
        rec.estimated_t = est.estimated.entries.tolist()
        rec.condition_number = est.condition_number
        rec.estimate_mse = est.mse_vs_truth
        rec.epochs["estimator"] = n_epochs
        if not known_t:
            correction_t = est.estimated

    for method in config.methods:
        kind = METHOD_LOSS[method]
        loss = LossSpec(kind, T=None if kind == "cross_entropy" else correction_t)
        monitor = None
        if config.monitor == "corrected" and kind != "cross_entropy":
            monitor = LossSpec("backward", T=correction_t)
        model = build(config.architecture, rd.test.image_shape, c, rd.seed,
                      filters=config.filters, hidden=config.hidden)
        model, hist = train(model, rd.parts.train, rd.parts.val, loss,
                            _train_config(config, rd.seed, kind), val_loss_fn=monitor)
        cm = metrics.confusion(rd.test.labels, model.predict(rd.test.images), c)
        report = metrics.compute_metrics(cm)
        rec.metrics[method] = report.as_dict()
        rec.undefined_classes[method] = list(report.undefined_classes)
        rec.epochs[method] = len(hist)
    rec.wall_clock = time.perf_counter() - t0
    return rec


def _summarize(config: ExperimentConfig, runs: list) -> ExperimentResult:
    aggregates = {}
    for method in config.methods:
        reports = [metrics.MetricsReport(**r.metrics[method]) for r in runs]
        aggregates[method] = aggregate_runs(reports)
    result = ExperimentResult(config.to_dict(), aggregates, growth_rates(aggregates), runs)
    ests = [r.estimated_t for r in runs if r.estimated_t is not None]
    if ests:
        mean_t = noise_model.from_rows(np.mean(ests, axis=0))
        result.estimated_t = mean_t.entries.tolist()
        result.condition_number = float(np.mean([r.condition_number for r in runs]))
        if config.noise != "estimate":
            result.estimate_mse = float(np.mean([r.estimate_mse for r in runs]))
    return result


def write_outputs(result: ExperimentResult, out_dir, stem: str = "result") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {ext: out_dir / f"{stem}.{ext}" for ext in ("json", "csv", "md")}
    paths["json"].write_text(result.to_json())
    paths["csv"].write_text(result.to_csv())
    paths["md"].write_text(result.to_markdown())
    return paths


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run ``config.n_runs`` seeded repetitions and aggregate them.

    With ``out_dir`` set, the runs finished so far are flushed to
    ``result.partial.json`` after every run, and the final result is written
    as ``result.json``, ``result.csv`` and ``result.md``.
    """
    runs = []
    partial = Path(out_dir) / "result.partial.json" if out_dir is not None else None
    if partial is not None:
        partial.parent.mkdir(parents=True, exist_ok=True)
    for run in range(config.n_runs):
        try:
            rec = run_once(config, run)
        except Exception as exc:
            if partial is not None:
                partial.write_text(json.dumps(_jsonable(
                    {"config": config.to_dict(), "failed_run": run, "error": str(exc),
                     "runs": [r.__dict__ for r in runs]}), indent=2) + "\n")
            raise ExperimentError(
                f"run {run} (seed {config.base_seed + run}) failed: {exc}") from exc
        runs.append(rec)
        log.info("run %d done in %.1fs: %s", run, rec.wall_clock,
                 {m: round(v["accuracy"], 4) for m, v in rec.metrics.items()})
        if partial is not None:
            partial.write_text(json.dumps(_jsonable(
                {"config": config.to_dict(), "runs": [r.__dict__ for r in runs]}), indent=2) + "\n")
    result = _summarize(config, runs)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result
