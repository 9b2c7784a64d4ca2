"""Mean-field equilibrium when each agent watches its own signal.

Agent n's signal V^n shares a common component (correlation rho through the
driving noise) with the population-average signal Vbar:

    dS_t    = (mu + b*nubar_t) dt + sigma dW_t,
    dV^n_t  = -(beta*V^n_t + gamma*nu^n_t + gammabar*nubar_t) dt + eta dZ^n_t,
    dVbar_t = -(beta*Vbar_t + (gamma+gammabar)*nubar_t) dt + rho*eta dZ_t,

with dZ^n = rho dZ + sqrt(1-rho^2) dZ^{n,perp}.  Own trading leans on the
own signal through gamma; everyone's trading leans on every signal through
gammabar.  The state carried by agent n's value function is
(x, q, qbar, S, V, Vbar), so the quadratic ansatz

    H^n = x + q S + h(t, q, qbar, V, Vbar)

needs fifteen coefficients.  The average rate nubar = f1 + f2*qbar + f3*Vbar
is pinned by consistency:

    f1 = (c2 - gamma*c4)/kappa,
    f2 = (2c6 + c10 - gamma*(c11 + c13))/kappa,
    f3 = (c11 + c12 - gamma*(2c8 + c15))/kappa,       kappa = 2k + kbar,

substituted algebraically into the right-hand side before integrating.
With alpha = gamma = mu = 0 six coefficients admit closed forms (the c9 one
through the long auxiliary function D9), implemented here as the oracle.
Setting gamma = 0 collapses the model onto the shared-signal equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import (
    ModelParams,
    SingularParameterError,
    TimeGrid,
    derived_constants,
    validate,
)
from .ode import (
    VectorField,
    cubic_interpolant,
    cumulative_integral,
    integrate_backward,
    sample_linear,
)

_C1_NODES = 4096


@dataclass(frozen=True)
class SeparateCoefficients:
    """Solved separate-signals system on a time grid.

    ``coeffs`` has shape (n_steps+1, 15), ``f`` has shape (n_steps+1, 3).
    Columns are exposed as attributes c1..c15 and f1..f3.
    """

    params: ModelParams
    grid: TimeGrid
    coeffs: np.ndarray
    f: np.ndarray

    @cached_property
    def times(self) -> np.ndarray:
        return self.grid.t_values

    def coeff_at(self, t):
        return sample_linear(self.times, self.coeffs, t)

    def f_at(self, t):
        return sample_linear(self.times, self.f, t)

    def __getattr__(self, name: str):
        # c1..c15 and f1..f3 resolve to table columns
        if len(name) >= 2 and name[0] in "cf" and name[1:].isdigit():
            idx = int(name[1:]) - 1
            table = self.coeffs if name[0] == "c" else self.f
            if 0 <= idx < table.shape[1]:
                return table[:, idx]
        raise AttributeError(name)


def _rhs(params: ModelParams):
    """Backward derivative of (c1..c15) with the f-substitution applied."""
    mu, eta, beta = params.mu, params.eta, params.beta
    g, gbar, rho, b = params.gamma, params.gamma_bar, params.rho, params.b
    k, kbar = params.k, params.k_bar
    kappa = 2.0 * k + kbar
    gsum = g + gbar

    def rhs(t: float, c: np.ndarray) -> np.ndarray:
        (c1, c2, c3, c4, c5, c6, c7, c8, c9, c10,
         c11, c12, c13, c14, c15) = c
        f1 = (c2 - g * c4) / kappa
        f2 = (2.0 * c6 + c10 - g * (c11 + c13)) / kappa
        f3 = (c11 + c12 - g * (2.0 * c8 + c15)) / kappa
        # drift weights picked up by the average rate acting on each state
        g1 = c3 - gbar * c4 - gsum * c5
        g2 = b + c10 - gbar * c11 - gsum * c12
        g3 = 2.0 * c7 - gbar * c13 - gsum * c14
        g4 = c13 - 2.0 * gbar * c8 - gsum * c15
        g5 = c14 - gbar * c15 - 2.0 * gsum * c9
        # residual own-rate weights entering the completed square
        e0 = c2 - g * c4 - kbar * f1
        eq = 2.0 * c6 - g * c11
        eqb = c10 - g * c13 - kbar * f2
        ev = c11 - 2.0 * g * c8
        evb = c12 - g * c15 - kbar * f3
        return np.array(
            [
                -(f1 * g1 + eta * eta * c8 + rho * rho * eta * eta * (c9 + c15)
                  + e0 * e0 / (4.0 * k)),
                -(mu + f1 * g2 + eq * e0 / (2.0 * k)),
                -(f1 * g3 + f2 * g1 + e0 * eqb / (2.0 * k)),
                beta * c4 - (f1 * g4 + e0 * ev / (2.0 * k)),
                beta * c5 - (f1 * g5 + f3 * g1 + e0 * evb / (2.0 * k)),
                -eq * eq / (4.0 * k),
                -(f2 * g3 + eqb * eqb / (4.0 * k)),
                2.0 * beta * c8 - ev * ev / (4.0 * k),
                2.0 * beta * c9 - (f3 * g5 + evb * evb / (4.0 * k)),
                -(f2 * g2 + eq * eqb / (2.0 * k)),
                beta * c11 - eq * ev / (2.0 * k),
                beta * c12 - (f3 * g2 + eq * evb / (2.0 * k)),
                beta * c13 - (f2 * g4 + ev * eqb / (2.0 * k)),
                beta * c14 - (f2 * g5 + f3 * g3 + eqb * evb / (2.0 * k)),
                2.0 * beta * c15 - (f3 * g4 + ev * evb / (2.0 * k)),
            ]
        )

    return rhs


def solve_separate(params: ModelParams, grid: TimeGrid | None = None) -> SeparateCoefficients:
    """Integrate the fifteen-equation system backward from its terminal values."""
    report = validate(params)
    if report:
        raise ValueError("invalid parameters: " + "; ".join(report))
    if grid is None:
        grid = TimeGrid(params.horizon_T)
    terminal = np.zeros(15)
    terminal[5] = -params.alpha
    terminal[10] = 1.0
    field = VectorField(dimension=15, rhs=_rhs(params))
    coeffs = integrate_backward(field, terminal, grid)
    g = params.gamma
    kappa = 2.0 * params.k + params.k_bar
    f = np.column_stack(
        [
            (coeffs[:, 1] - g * coeffs[:, 3]) / kappa,
            (2.0 * coeffs[:, 5] + coeffs[:, 9] - g * (coeffs[:, 10] + coeffs[:, 12]))
            / kappa,
            (coeffs[:, 10] + coeffs[:, 11] - g * (2.0 * coeffs[:, 7] + coeffs[:, 14]))
            / kappa,
        ]
    )
    return SeparateCoefficients(params=params, grid=grid, coeffs=coeffs, f=f)


def _require_closed_form_params(params: ModelParams) -> None:
    if params.alpha != 0.0 or params.gamma != 0.0 or params.mu != 0.0:
        raise ValueError("closed form requires alpha = 0, gamma = 0 and mu = 0")
    if params.gamma_bar == 0.0:
        raise SingularParameterError(
            "closed form undefined: gamma_bar must be nonzero"
        )
    if params.b == 0.0:
        raise SingularParameterError("closed form undefined: b must be nonzero")
    cons = derived_constants(params)
    if cons.omega == 0.0:
        raise SingularParameterError(
            "closed form undefined: omega must be nonzero (kappa*beta = b)"
        )


def _d9(params: ModelParams, tau):
    """Auxiliary factor in the closed-form c9; vanishes at tau = 0."""
    cons = derived_constants(params)
    k, b = params.k, params.b
    z, om, kappa = cons.z, cons.omega, cons.kappa
    e2om = np.exp(-2.0 * om * tau)
    eom = np.exp(-om * tau)
    return (
        (1.0 - e2om) / (2.0 * om) - tau * e2om
    ) / (16.0 * k * z * z) - (1.0 + 2.0 * z) / (8.0 * k * z * z) * (
        (1.0 - eom) / om - tau * eom
    ) + (1.0 - np.exp((2.0 * b / kappa - params.beta) * tau)) / (2.0 * b * z) + k / (
        2.0 * b * kappa
    ) * (1.0 - np.exp(2.0 * b * tau / kappa)) - (1.0 + 2.0 * z) / (2.0 * b * z) * (
        1.0 - np.exp(b * tau / kappa)
    ) - (1.0 - e2om) / (32.0 * k * z * z * om) + (
        (1.0 + 2.0 * z) * b - 4.0 * k * z * om
    ) / (8.0 * b * k * z * z * om) * (1.0 - eom) - (1.0 + 2.0 * z) ** 2 / (
        16.0 * k * z * z
    ) * tau


def _closed_pointwise(params: ModelParams, tau):
    """(c8, c9, c11, c12, c15) closed forms as functions of time-to-go."""
    cons = derived_constants(params)
    k, b, beta = params.k, params.b, params.beta
    z, om, kappa = cons.z, cons.omega, cons.kappa
    decay = np.exp(-beta * tau)
    denom = (1.0 + 2.0 * z) * np.exp(om * tau) - 1.0
    c8 = tau / (4.0 * k) * decay * decay
    c9 = -4.0 * z * z * np.exp(-2.0 * b * tau / kappa) / (denom * denom) * _d9(params, tau)
    c11 = decay
    c12 = 2.0 * z / denom - decay
    c15 = -tau / (2.0 * k) * decay * decay + (2.0 * z / denom) * (
        (1.0 - np.exp(-b * tau / kappa)) / b
    ) * decay
    return c8, c9, c11, c12, c15


def closed_form_separate(params: ModelParams, t):
    """Closed-form (c1, c8, c9, c11, c12, c15) for alpha = gamma = mu = 0.

    c1 integrates eta^2*c8 + rho^2*eta^2*(c9 + c15) from t to T through a
    dense antiderivative.  Accepts scalar or array t in [0, T].
    """
    _require_closed_form_params(params)
    T = params.horizon_T
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError("time outside [0, T]")
    c8, c9, c11, c12, c15 = _closed_pointwise(params, T - t_arr)

    nodes = np.linspace(0.0, T, _C1_NODES + 1)
    c8n, c9n, _, _, c15n = _closed_pointwise(params, T - nodes)
    eta2 = params.eta**2
    integrand = eta2 * c8n + params.rho**2 * eta2 * (c9n + c15n)
    anti = cumulative_integral(integrand, T / _C1_NODES)
    c1 = anti[-1] - cubic_interpolant(nodes, anti)(t_arr)

    if t_arr.ndim == 0:
        return (float(c1), float(c8), float(c9), float(c11), float(c12), float(c15))
    return c1, c8, c9, c11, c12, c15


def feedback_rate_separate(coeffs: SeparateCoefficients, t, q, q_bar, V, V_bar):
    """Optimal rate given own inventory q, own signal V, and crowd state."""
    c = coeffs.coeff_at(t)
    f = coeffs.f_at(t)
    p = coeffs.params
    k, kbar, g = p.k, p.k_bar, p.gamma
    e0 = c[..., 1] - g * c[..., 3] - kbar * f[..., 0]
    eq = 2.0 * c[..., 5] - g * c[..., 10]
    eqb = c[..., 9] - g * c[..., 12] - kbar * f[..., 1]
    ev = c[..., 10] - 2.0 * g * c[..., 7]
    evb = c[..., 11] - g * c[..., 14] - kbar * f[..., 2]
    return (
        e0 / (2.0 * k)
        + eq / (2.0 * k) * q
        + eqb / (2.0 * k) * q_bar
        + ev / (2.0 * k) * V
        + evb / (2.0 * k) * V_bar
    )


def mean_field_rate_separate(coeffs: SeparateCoefficients, t, q_bar, V_bar):
    """Average trading rate nubar = f1 + f2*qbar + f3*Vbar."""
    f = coeffs.f_at(t)
    return f[..., 0] + f[..., 1] * q_bar + f[..., 2] * V_bar


def loadings_separate(coeffs: SeparateCoefficients):
    """Equilibrium rate loadings (nu_q, nu_qbar, nu_V, nu_Vbar) on the grid."""
    p = coeffs.params
    k, kbar, g = p.k, p.k_bar, p.gamma
    c = coeffs.coeffs
    f = coeffs.f
    nu_q = (2.0 * c[:, 5] - g * c[:, 10]) / (2.0 * k)
    nu_qbar = (c[:, 9] - g * c[:, 12] - kbar * f[:, 1]) / (2.0 * k)
    nu_v = (c[:, 10] - 2.0 * g * c[:, 7]) / (2.0 * k)
    nu_vbar = (c[:, 11] - g * c[:, 14] - kbar * f[:, 2]) / (2.0 * k)
    return nu_q, nu_qbar, nu_v, nu_vbar
