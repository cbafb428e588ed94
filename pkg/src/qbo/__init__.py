"""Moment dynamics of the damped quantum Brownian oscillator.

Closed-form position variances, mechanically derived moment ODE systems,
kurtosis experiments, a classical Langevin oracle, and the CSV/plot/HTTP
front ends that tie them together.
"""

__version__ = "0.1.0"

from .model import (
    FourthMomentVector,
    MomentState,
    OscillatorParams,
    QuadraticState,
    Regime,
    RegimeKind,
    classify_regime,
    gaussian_fourth_moments,
    validate_params,
)

__all__ = [
    "__version__",
    "OscillatorParams",
    "QuadraticState",
    "FourthMomentVector",
    "MomentState",
    "Regime",
    "RegimeKind",
    "validate_params",
    "classify_regime",
    "gaussian_fourth_moments",
]
