"""Experiment harness: run configs, runtime search, sweeps, gaps and scaling."""
from .config import RunConfig, load_config, save_config
from .experiments import (
    energy_vs_runtime,
    evolution_series,
    fit_power_law,
    gap_report,
    scaling_study,
    successful_runtime,
)
