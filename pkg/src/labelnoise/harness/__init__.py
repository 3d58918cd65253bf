"""Experiment orchestration and the command-line interface."""
from .config import ConfigError, ExperimentConfig, TrainSettings
from .experiment import ExperimentError, ExperimentResult, run_experiment, run_once

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentError", "ExperimentResult",
           "TrainSettings", "run_experiment", "run_once"]
