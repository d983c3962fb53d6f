from .config import ConfigError, ExperimentConfig, desk_config, paper_config
from .metrics import Metrics, evaluate
from .pipeline import StageError, run_experiment

__all__ = [
    "ConfigError", "ExperimentConfig", "Metrics", "StageError",
    "desk_config", "evaluate", "paper_config", "run_experiment",
]
