"""Small convolutional networks with manual backpropagation."""
from .adversarial import fgsm_example, input_gradient
from .checkpoint import CheckpointError, load_model, save_model
from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2x2,
    ReLU,
    Softmax,
    log_softmax,
    softmax,
)
from .model import ARCHITECTURES, Model, StaleCacheError, build, linear_softmax
from .optim import AdamState, adam_step
from .training import History, TrainConfig, TrainingDivergedError, evaluate_loss, train

__all__ = [
    "ARCHITECTURES", "AdamState", "CheckpointError", "Conv2D", "Dense", "Dropout",
    "Flatten", "History", "MaxPool2x2", "Model", "ReLU", "Softmax", "StaleCacheError",
    "TrainConfig", "TrainingDivergedError", "adam_step", "build", "evaluate_loss",
    "fgsm_example", "input_gradient", "linear_softmax", "load_model", "log_softmax",
    "save_model", "softmax", "train",
]
