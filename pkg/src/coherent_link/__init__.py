"""Entanglement generation between quantum memories with coherent-state pulses.

Closed-form rates for the CTW, COW-USD and COW-DR link protocols, a truncated
Fock-space simulator used as an independent oracle, non-ideality models, and
sweep/optimization tools with a command-line front end.
"""

__version__ = "0.1.0"

from .bell import BellDiagonal, DensityOperator, HeraldOutcome
from .core import DomainError, TruncationError, UnsupportedConfigurationError
from .nonideal import NoiseConfig, rate_composed, rate_point
from .protocols import (
    PROTOCOLS,
    LinkConfig,
    RatePoint,
    cow_dr_rate,
    cow_usd_rate,
    ctw_rate,
    eta_from_db,
)
from .sweep import GhzSpec, SweepSpec, crossover_loss, ghz_expected_rounds, optimize_alpha, sweep_loss

__all__ = [
    "BellDiagonal",
    "DensityOperator",
    "DomainError",
    "GhzSpec",
    "HeraldOutcome",
    "LinkConfig",
    "NoiseConfig",
    "PROTOCOLS",
    "RatePoint",
    "SweepSpec",
    "TruncationError",
    "UnsupportedConfigurationError",
    "cow_dr_rate",
    "cow_usd_rate",
    "crossover_loss",
    "ctw_rate",
    "eta_from_db",
    "ghz_expected_rounds",
    "optimize_alpha",
    "rate_composed",
    "rate_point",
    "sweep_loss",
]
