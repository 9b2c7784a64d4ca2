"""Canonical parameter sets used by the bundled figure reproductions.

Three nested baselines cover the three models: one agent trading on a
private signal, a crowd sharing one signal, and a crowd with correlated
private signals.  The strong-impact variant turns up the signal volatility
and the permanent impact so population-level effects are visible in the
cross-sectional moment and price-variance figures.
"""

from __future__ import annotations

from dataclasses import replace

from .model import InitialDistribution, ModelParams

BASE_SINGLE = ModelParams(
    mu=0.0,
    sigma=1.0,
    eta=0.5,
    beta=1.0,
    gamma=0.1,
    gamma_bar=0.0,
    rho=0.3,
    b=1e-2,
    k=5e-3,
    k_bar=0.0,
    alpha=0.1,
    horizon_T=1.0,
)

# crowd baselines: own-flow signal impact moves to the population channel
BASE_SHARED = replace(BASE_SINGLE, gamma=0.0, gamma_bar=0.1, k_bar=1e-3)

BASE_SEPARATE = replace(BASE_SHARED, gamma=0.05)

STRONG_IMPACT = replace(BASE_SEPARATE, eta=1.0, b=5e-2)

DEMO_INIT = InitialDistribution(
    mean_Q0=0.0,
    var_Q0=0.25,
    mean_V0=0.0,
    var_V0=4e-4,
    cov_Q0V0=0.0,
    S0=100.0,
)
