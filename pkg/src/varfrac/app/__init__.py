"""Configuration, presets, simulation driver and CLI."""

from .config import ConfigError, SimulationConfig, dump_config, parse_config
from .output import read_snapshot_1d, write_snapshot_1d, write_snapshot_3d
from .presets import PRESETS, get_preset
from .simulation import (
    ActivationRecorder,
    Problem,
    RunResult,
    ThresholdResult,
    build_problem,
    find_diastolic_threshold,
    run_problem,
    run_simulation,
)
from .stimulus import StimulusProtocol

__all__ = [
    "PRESETS",
    "ActivationRecorder",
    "ConfigError",
    "Problem",
    "RunResult",
    "SimulationConfig",
    "StimulusProtocol",
    "ThresholdResult",
    "build_problem",
    "dump_config",
    "find_diastolic_threshold",
    "get_preset",
    "parse_config",
    "read_snapshot_1d",
    "run_problem",
    "run_simulation",
    "write_snapshot_1d",
    "write_snapshot_3d",
]
