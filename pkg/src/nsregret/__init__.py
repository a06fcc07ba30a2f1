"""Simulators for non-stationary bandits and experts with dynamic pseudo-regret measurement."""
from .envmodel import (
    ArmDistribution,
    DistributionSequence,
    NonStationarityParams,
    compute_params,
    gen_drifting,
    gen_switching,
    sample_losses,
)

__all__ = [
    "ArmDistribution",
    "DistributionSequence",
    "NonStationarityParams",
    "compute_params",
    "gen_drifting",
    "gen_switching",
    "sample_losses",
]
__version__ = "0.1.0"
