from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..data import SyntheticSpec

METHODS = ("ce_baseline", "reweighted", "backward")
METHOD_LOSS = {"ce_baseline": "cross_entropy", "reweighted": "reweighted", "backward": "backward"}
ARCHS = ("small_cnn", "enhanced_cnn")
MONITORS = ("own", "corrected")

# default synthetic task: hard enough that 50% label noise costs a CNN accuracy
DEFAULT_DATASET = {
    "n_classes": 3,
    "samples_per_class": 500,
    "image_shape": [16, 16, 1],
    "template_contrast": 0.5,
    "pixel_noise_sigma": 0.5,
    "test_per_class": 200,
}


class ConfigError(ValueError):
    pass


@dataclass
class TrainSettings:
    """Training knobs shared by every method; the seed comes from the run."""

    batch_size: int = 64
    max_epochs: int = 40
    patience: int = 8
    learning_rate: float = 0.001
    val_fraction: float = 0.2


@dataclass
class ExperimentConfig:
    dataset: dict = field(default_factory=lambda: dict(DEFAULT_DATASET))
    noise: str = "fashion05"
    hidden_noise: str = "fashion05"
    estimate_t: bool = False
    methods: list = field(default_factory=lambda: list(METHODS))
    normalization: bool = True
    architecture: str = "small_cnn"
    filters: list | None = None
    hidden: int | None = None
    n_runs: int = 10
    base_seed: int = 0
    estimator_epochs: int = 20
    monitor: str = "corrected"
    train: TrainSettings = field(default_factory=TrainSettings)

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = _strict(TrainSettings, self.train, "train")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if not self.methods:
            raise ConfigError("select at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods listed more than once")
        if self.architecture not in ARCHS:
            raise ConfigError(f"architecture must be one of {ARCHS}")
        if self.monitor not in MONITORS:
            raise ConfigError(f"monitor must be one of {MONITORS}")
        if self.noise == "estimate" and self.hidden_noise == "estimate":
            raise ConfigError("hidden_noise must name an actual noise process")
        if self.is_file_dataset:
            missing = {"train_file", "test_file"} - set(self.dataset)
            extra = set(self.dataset) - {"train_file", "test_file"}
            if missing or extra:
                raise ConfigError("a file dataset takes exactly train_file and test_file")
        else:
            extra = set(self.dataset) - set(DEFAULT_DATASET)
            if extra:
                raise ConfigError(f"unknown dataset keys {sorted(extra)}")
            self.dataset = {**DEFAULT_DATASET, **self.dataset}
            self.synthetic_spec()  # validates

    @property
    def is_file_dataset(self) -> bool:
        return "train_file" in self.dataset or "test_file" in self.dataset

    def synthetic_spec(self, test: bool = False) -> SyntheticSpec:
        d = self.dataset
        return SyntheticSpec(
            n_classes=int(d["n_classes"]),
            samples_per_class=int(d["test_per_class"] if test else d["samples_per_class"]),
            image_shape=tuple(int(v) for v in d["image_shape"]),
            template_contrast=float(d["template_contrast"]),
            pixel_noise_sigma=float(d["pixel_noise_sigma"]),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return _strict(cls, raw, "config")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(raw)


def _strict(cls, raw: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from None
