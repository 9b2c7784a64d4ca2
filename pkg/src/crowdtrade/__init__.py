"""Optimal trading with mean-reverting trade signals.

Solvers for the single-agent control problem and for two mean-field
equilibria (all agents observing one shared signal, or each agent observing
a private correlated signal), population-level moment formulas, a finite-N
Euler-Maruyama simulator with deterministic counter-based noise, and a CLI
that emits figure-ready CSV data with rendered plots.
"""

from .model import (
    DerivedConstants,
    InitialDistribution,
    ModelParams,
    SingularParameterError,
    TimeGrid,
    derived_constants,
    validate,
    validate_initial,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedConstants",
    "InitialDistribution",
    "ModelParams",
    "SingularParameterError",
    "TimeGrid",
    "derived_constants",
    "validate",
    "validate_initial",
    "__version__",
]
