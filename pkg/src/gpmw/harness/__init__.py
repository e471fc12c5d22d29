"""Experiment orchestration: configs, runs, regret ledgers, logs and summaries."""

from .build import agent_seed, build_environment, build_learner, derive_seed
from .config import ExperimentConfig, from_dict, load_config
from .fit import fit_hyperparameters, log_marginal_likelihood, select_kernel
from .ledger import RegretLedger, regret_series
from .log import EpisodeLog, LogError
from .runner import RunError, run_all, run_episode, run_experiment
from .summary import export, load_logs, summarize, write_outputs

__all__ = [
    "EpisodeLog",
    "ExperimentConfig",
    "LogError",
    "RegretLedger",
    "RunError",
    "agent_seed",
    "build_environment",
    "build_learner",
    "derive_seed",
    "export",
    "fit_hyperparameters",
    "from_dict",
    "load_config",
    "load_logs",
    "log_marginal_likelihood",
    "regret_series",
    "run_all",
    "run_episode",
    "run_experiment",
    "select_kernel",
    "summarize",
    "write_outputs",
]
