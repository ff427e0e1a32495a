"""Strategic doubly robust estimation of causal effects under equilibrium treatment choice."""

from .datagen import DataGenConfig, gen_dataset, true_sate
from .domain import Dataset, EquilibriumState, EstimateReport, ObservedData, PayoffParameters
from .estimator import SdrConfig, run_dr_nonstrategic, run_sdr

__all__ = [
    "DataGenConfig",
    "Dataset",
    "EquilibriumState",
    "EstimateReport",
    "ObservedData",
    "PayoffParameters",
    "SdrConfig",
    "gen_dataset",
    "run_dr_nonstrategic",
    "run_sdr",
    "true_sate",
]
