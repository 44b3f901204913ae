"""Configuration, deterministic runs, reports, acceptance criteria and the ``lab`` CLI."""

from .config import ExperimentConfig, dump_config, load_config, parse_config
from .criteria import CRITERIA, LEVELS, CriterionResult, SuiteResult, verify_suite
from .run import OUTPUT_ROOT_ENV, RunManifest, run_experiment

__all__ = [
    "CRITERIA", "LEVELS", "OUTPUT_ROOT_ENV", "CriterionResult", "ExperimentConfig", "RunManifest", "SuiteResult",
    "dump_config", "load_config", "parse_config", "run_experiment", "verify_suite",
]
