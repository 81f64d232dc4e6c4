"""Experiment orchestration: configs, single runs, sweeps, oracle comparison, privacy report."""

from .config import ExperimentConfig, config_from_dict, load_config, validate_config
from .experiment import (
    ExperimentResult,
    MetricsRow,
    OracleComparison,
    Setup,
    compare_oracle,
    metrics_csv,
    prepare,
    run_experiment,
    run_oracle,
    run_split_local,
)

__all__ = [
    "ExperimentConfig", "ExperimentResult", "MetricsRow", "OracleComparison", "Setup",
    "compare_oracle", "config_from_dict", "load_config", "metrics_csv", "prepare",
    "run_experiment", "run_oracle", "run_split_local", "validate_config",
]
