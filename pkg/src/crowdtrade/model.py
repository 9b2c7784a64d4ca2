"""Parameter containers, validation, and derived constants.

The market model: a midprice S with permanent impact from the aggregate
trading rate nubar,

    dS_t = (mu + b*nubar_t) dt + sigma dW_t,

and per-agent trade signals V^n that mean-revert at rate beta and are eroded
by own trading (gamma) and aggregate trading (gamma_bar),

    dV^n_t = -(beta V^n_t + gamma nu^n_t + gamma_bar nubar_t) dt + eta dZ^n_t,
    Z^n_t  = rho W_t + sqrt(1 - rho^2) W^{n,perp}_t.

Executions pay a temporary impact k on the agent's own rate and k_bar on the
aggregate rate; terminal inventory is charged alpha*Q_T^2.  The derived
constants

    kappa = 2k + k_bar,   z = (kappa*beta - b)/(2*gamma_bar),
    omega = (kappa*beta - b)/kappa

appear throughout the closed-form solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "InitialDistribution",
    "TimeGrid",
    "SingularParameterError",
    "validate",
    "validate_initial",
    "derived_constants",
]


class SingularParameterError(ValueError):
    """A closed-form expression is undefined at the given parameters."""


@dataclass(frozen=True)
class ModelParams:
    """Market and preference parameters; see the module docstring for units."""

    mu: float            # midprice drift
    sigma: float         # midprice volatility
    eta: float           # signal volatility
    beta: float          # signal mean-reversion rate
    gamma: float         # own-trade signal impact
    gamma_bar: float     # aggregate-trade signal impact
    rho: float           # signal-price correlation
    b: float             # permanent price impact
    k: float             # temporary impact, own rate
    k_bar: float         # temporary impact, aggregate rate
    alpha: float         # terminal inventory penalty
    horizon_T: float     # trading horizon


@dataclass(frozen=True)
class DerivedConstants:
    kappa: float
    z: float
    omega: float


@dataclass(frozen=True)
class InitialDistribution:
    """Gaussian law of the initial cross-section (Q0, V0) and the price S0."""

    mean_Q0: float
    var_Q0: float
    mean_V0: float
    var_V0: float
    cov_Q0V0: float
    S0: float

    def covariance(self) -> np.ndarray:
        return np.array(
            [[self.var_Q0, self.cov_Q0V0], [self.cov_Q0V0, self.var_V0]]
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = horizon_T."""

    horizon_T: float
    n_steps: int = 10_000

    def __post_init__(self) -> None:
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def dt(self) -> float:
        return self.horizon_T / self.n_steps

    @cached_property
    def t_values(self) -> np.ndarray:
        t = np.linspace(0.0, self.horizon_T, self.n_steps + 1)
        t.setflags(write=False)
        return t


def validate(params: ModelParams) -> list[str]:
    """Check parameter invariants; returns a list of violations (empty = valid)."""
    report = []
    if not params.sigma >= 0:
        report.append("sigma must be nonnegative")
    if not params.eta >= 0:
        report.append("eta must be nonnegative")
    if not params.beta >= 0:
        report.append("beta must be nonnegative")
    if not params.k > 0:
        report.append("k must be positive")
    if not params.k_bar >= 0:
        report.append("k_bar must be nonnegative")
    if not params.alpha >= 0:
        report.append("alpha must be nonnegative")
    if not -1.0 <= params.rho <= 1.0:
        report.append("rho must lie in [-1, 1]")
    if not params.horizon_T > 0:
        report.append("horizon_T must be positive")
    return report


def validate_initial(init: InitialDistribution) -> list[str]:
    """Check that the initial cross-sectional covariance is well formed."""
    report = []
    if not init.var_Q0 >= 0:
        report.append("var_Q0 must be nonnegative")
    if not init.var_V0 >= 0:
        report.append("var_V0 must be nonnegative")
    if init.cov_Q0V0 ** 2 > init.var_Q0 * init.var_V0:
        report.append("initial covariance matrix must be positive semidefinite")
    return report


def derived_constants(params: ModelParams) -> DerivedConstants:
    """kappa, z, omega of the closed-form solutions.

    Raises SingularParameterError when gamma_bar = 0 (z undefined).
    """
    if params.gamma_bar == 0:
        raise SingularParameterError("z undefined: gamma_bar must be nonzero")
    kappa = 2.0 * params.k + params.k_bar
    z = (kappa * params.beta - params.b) / (2.0 * params.gamma_bar)
    omega = (kappa * params.beta - params.b) / kappa
    return DerivedConstants(kappa=kappa, z=z, omega=omega)
