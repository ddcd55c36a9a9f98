"""Number-phase Wigner representation and stochastic simulation of a damped Kerr oscillator."""

from .fock import ModelParams, StabilityError, TruncationError
from .representation import NumPhaseDist, SymmetryError
from .sampling import SignedDistribution, WeightedEnsemble, ZeroWeightError
from .sde import EnsembleTimeSeries, IntegrationParams, run_ensemble
from .experiment import ConfigError, ExperimentConfig, parse_config, run_experiment

__all__ = [
    "ConfigError",
    "EnsembleTimeSeries",
    "ExperimentConfig",
    "IntegrationParams",
    "ModelParams",
    "NumPhaseDist",
    "SignedDistribution",
    "StabilityError",
    "SymmetryError",
    "TruncationError",
    "WeightedEnsemble",
    "ZeroWeightError",
    "parse_config",
    "run_ensemble",
    "run_experiment",
]
