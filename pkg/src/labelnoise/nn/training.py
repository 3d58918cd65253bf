from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import Model
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    val_fraction: float = 0.2
    loss_kind: str = "cross_entropy"
    learning_rate: float = 0.001

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass
class History:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def __len__(self):
        return len(self.epochs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for row in zip(self.epochs, self.train_loss, self.val_loss):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


def _unpack(dataset):
    if isinstance(dataset, tuple):
        x, y = dataset
    else:
        x, y = dataset.images, dataset.labels
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(x) == 0:
        raise ValueError("dataset is empty")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} images but {len(y)} labels")
    return x, y


def evaluate_loss(model: Model, dataset, loss_fn, batch_size: int = 256) -> float:
    x, y = _unpack(dataset)
    probs = model.predict_proba(x, batch_size)
    return loss_fn(probs, y).value


def train(model: Model, train_set, val_set, loss_fn, config: TrainConfig | None = None,
          val_loss_fn=None):
    """Mini-batch Adam with early stopping on validation loss.

    ``loss_fn(probs, labels)`` must return an object with ``value`` and
    ``grad_logits``. Validation uses ``val_loss_fn`` when given, else
    ``loss_fn``. The model ends up holding the weights of the epoch with the
    lowest validation loss. Returns ``(model, history)``.
    """
    config = config or TrainConfig()
    val_loss_fn = val_loss_fn or loss_fn
    x, y = _unpack(train_set)
    vx, vy = _unpack(val_set)
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_params(model.parameters(), alpha=config.learning_rate)
    history = History()
    best = np.inf
    best_weights = model.get_weights()
    wait = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = order[start:start + config.batch_size]
            probs, cache = model.forward(x[idx], training=True,
                                         seed=int(rng.integers(2**63)))
            result = loss_fn(probs, y[idx])
            if not np.isfinite(result.value) or not np.all(np.isfinite(result.grad_logits)):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: {result.value}"
                )
            grads = model.backward(cache, result.grad_logits)
            adam_step(state, model.parameters(), grads)
            model.mark_updated()
            total += result.value * len(idx)

        val = evaluate_loss(model, (vx, vy), val_loss_fn)
        if not np.isfinite(val):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        history.epochs.append(epoch)
        history.train_loss.append(total / len(x))
        history.val_loss.append(val)
        log.debug("epoch %d train %.4f val %.4f", epoch, total / len(x), val)

        if val < best:
            best, wait = val, 0
            best_weights = model.get_weights()
            history.best_epoch = epoch
        else:
            wait += 1
            if wait >= config.patience:
                history.stopped_early = True
                break

    model.set_weights(best_weights)
    return model, history
