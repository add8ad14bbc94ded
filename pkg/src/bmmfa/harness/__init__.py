"""Experiment sweeps, persistence and plotting."""

from .config import ConfigError, ExperimentConfig
from .experiment import execute_run, replay, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "execute_run", "replay", "run_experiment"]
