"""Conformalized empirical-Bayes testing of normal means with unknown variances."""

from .calibration import CalibrationRecord, RngStream, build_pseudo_calibration, sample_calibration
from .conformity import ConformityScorer, WorkingPriorConfig, WorkingPriorFit, fit_working_prior
from .core import NO_THRESHOLD, CoinResult, ScoredPair, ScoredPairs, coin_decide, coin_threshold, run_coin
from .data import RawMatrix, SummaryData, SummaryStat
from .densities import DiscretePrior, HierParams, null_conditional_log_density
from .npmle import NpmleConfig, NpmleFit, fit_npmle
from .simulation import ScenarioSpec, run_experiment
from .splitting import ebh, run_coin_fs, run_coin_ss, u_ebh

__version__ = "0.1.0"

__all__ = [
    "CalibrationRecord",
    "CoinResult",
    "ConformityScorer",
    "DiscretePrior",
    "HierParams",
    "NO_THRESHOLD",
    "NpmleConfig",
    "NpmleFit",
    "RawMatrix",
    "RngStream",
    "ScenarioSpec",
    "ScoredPair",
    "ScoredPairs",
    "SummaryData",
    "SummaryStat",
    "WorkingPriorConfig",
    "WorkingPriorFit",
    "build_pseudo_calibration",
    "coin_decide",
    "coin_threshold",
    "ebh",
    "fit_npmle",
    "fit_working_prior",
    "null_conditional_log_density",
    "run_coin",
    "run_coin_fs",
    "run_coin_ss",
    "run_experiment",
    "sample_calibration",
    "u_ebh",
]
