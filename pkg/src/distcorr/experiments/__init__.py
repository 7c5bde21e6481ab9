"""Scenario configuration, figure presets, runner and result tables."""

from .config import ConfigError, ScenarioConfig, load_config
from .presets import PRESETS, figure_preset
from .results import ResultTable, read_results, write_results
from .runner import run_scenario

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "PRESETS",
    "figure_preset",
    "ResultTable",
    "read_results",
    "write_results",
    "run_scenario",
]
