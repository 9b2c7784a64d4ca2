"""Mean-field equilibrium when every agent watches the same signal.

A continuum of agents trades the asset

    dS_t = (mu + b*nubar_t + V_t) dt + sigma dW_t,
    dV_t = -(beta*V_t + gammabar*nubar_t) dt + eta dZ_t,

where nubar is the population's average trading rate and the signal V is
common to all agents.  Agent n controls its rate nu^n, pays k*(nu^n)^2 in
execution costs plus kbar*nu^n*nubar in crowding costs, and unwinds at T
with penalty alpha*q^2.  The value function ansatz

    H^n = x + q S + h(t, q, qbar, Vbar),
    h   = c1 + c2 q + c3 qbar + c4 Vbar + c5 q^2 + c6 qbar^2 + c7 Vbar^2
          + c8 q qbar + c9 q Vbar + c10 qbar Vbar,

reduces the equilibrium HJB to ten coupled Riccati equations.  The average
rate is affine, nubar = f1 + f2*qbar + f3*Vbar, and internal consistency of
the equilibrium forces

    f1 = c2/kappa,   f2 = (2 c5 + c8)/kappa,   f3 = c9/kappa,

with kappa = 2k + kbar.  These substitutions are made algebraically inside
the right-hand side before integrating, so no fixed-point iteration over f
is ever needed.

With alpha = mu = 0 the surviving coefficients admit closed forms in the
derived constants z = (kappa*beta - b)/(2*gammabar) and
omega = (kappa*beta - b)/kappa, used here as an independent oracle.
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

# panels for the dense antiderivative behind the closed-form c1 integral
_C1_NODES = 4096


@dataclass(frozen=True)
class SharedCoefficients:
    """Solved shared-signal system on a time grid.

    ``coeffs`` has shape (n_steps+1, 10) holding c1..c10 by column;
    ``f`` has shape (n_steps+1, 3) holding the average-rate loadings.
    """

    params: ModelParams
    grid: TimeGrid
    coeffs: np.ndarray
    f: np.ndarray

    @cached_property
    def times(self) -> np.ndarray:
        return self.grid.t_values

    def coeff_at(self, t):
        """Linearly interpolated c-vector at time t (domain-checked)."""
        return sample_linear(self.times, self.coeffs, t)

    def f_at(self, t):
        return sample_linear(self.times, self.f, t)

    @property
    def c1(self) -> np.ndarray:
        return self.coeffs[:, 0]

    @property
    def c2(self) -> np.ndarray:
        return self.coeffs[:, 1]

    @property
    def c3(self) -> np.ndarray:
        return self.coeffs[:, 2]

    @property
    def c4(self) -> np.ndarray:
        return self.coeffs[:, 3]

    @property
    def c5(self) -> np.ndarray:
        return self.coeffs[:, 4]

    @property
    def c6(self) -> np.ndarray:
        return self.coeffs[:, 5]

    @property
    def c7(self) -> np.ndarray:
        return self.coeffs[:, 6]

    @property
    def c8(self) -> np.ndarray:
        return self.coeffs[:, 7]

    @property
    def c9(self) -> np.ndarray:
        return self.coeffs[:, 8]

    @property
    def c10(self) -> np.ndarray:
        return self.coeffs[:, 9]

    @property
    def f1(self) -> np.ndarray:
        return self.f[:, 0]

    @property
    def f2(self) -> np.ndarray:
        return self.f[:, 1]

    @property
    def f3(self) -> np.ndarray:
        return self.f[:, 2]


def _rhs(params: ModelParams):
    """Backward derivative of (c1..c10) with the f-substitution applied."""
    mu, eta, beta = params.mu, params.eta, params.beta
    gbar, b = params.gamma_bar, params.b
    k, kappa = params.k, 2.0 * params.k + params.k_bar
    kbar = params.k_bar

    def rhs(t: float, c: np.ndarray) -> np.ndarray:
        c1, c2, c3, c4, c5, c6, c7, c8, c9, c10 = c
        f1 = c2 / kappa
        f2 = (2.0 * c5 + c8) / kappa
        f3 = c9 / kappa
        # residual own-rate weights after netting the crowding charge
        e0 = c2 - kbar * f1
        eq = c8 - kbar * f2
        ev = c9 - kbar * f3
        m1 = c3 - gbar * c4
        m2 = b + c8 - gbar * c9
        m3 = 2.0 * c6 - gbar * c10
        m4 = c10 - 2.0 * gbar * c7
        return np.array(
            [
                -(f1 * m1 + eta * eta * c7 + e0 * e0 / (4.0 * k)),
                -(mu + f1 * m2 + e0 * c5 / k),
                -(f1 * m3 + f2 * m1 + e0 * eq / (2.0 * k)),
                beta * c4 - (f1 * m4 + f3 * m1 + e0 * ev / (2.0 * k)),
                -c5 * c5 / k,
                -(f2 * m3 + eq * eq / (4.0 * k)),
                2.0 * beta * c7 - (f3 * m4 + ev * ev / (4.0 * k)),
                -(f2 * m2 + c5 * eq / k),
                beta * c9 - (f3 * m2 + c5 * ev / k),
                beta * c10 - (f2 * m4 + f3 * m3 + eq * ev / (2.0 * k)),
            ]
        )

    return rhs


def solve_shared(params: ModelParams, grid: TimeGrid | None = None) -> SharedCoefficients:
    """Integrate the ten-equation system backward from its terminal values.

    The own-impact coefficient gamma plays no role here: only the crowd
    moves the shared signal.
    """
    report = validate(params)
    if report:
        raise ValueError("invalid parameters: " + "; ".join(report))
    if grid is None:
        grid = TimeGrid(params.horizon_T)
    terminal = np.zeros(10)
    terminal[4] = -params.alpha
    terminal[8] = 1.0
    field = VectorField(dimension=10, rhs=_rhs(params))
    coeffs = integrate_backward(field, terminal, grid)
    kappa = 2.0 * params.k + params.k_bar
    f = np.column_stack(
        [
            coeffs[:, 1] / kappa,
            (2.0 * coeffs[:, 4] + coeffs[:, 7]) / kappa,
            coeffs[:, 8] / kappa,
        ]
    )
    return SharedCoefficients(params=params, grid=grid, coeffs=coeffs, f=f)


def _require_closed_form_params(params: ModelParams) -> None:
    if params.alpha != 0.0 or params.mu != 0.0:
        raise ValueError("closed form requires alpha = 0 and mu = 0")
    if params.gamma_bar == 0.0:
        raise SingularParameterError(
            "closed form undefined: gamma_bar must be nonzero"
        )
    if params.b == 0.0:
        raise SingularParameterError("closed form undefined: b must be nonzero")


def _c9_closed(params: ModelParams, tau):
    cons = derived_constants(params)
    return 2.0 * cons.z / ((1.0 + 2.0 * cons.z) * np.exp(cons.omega * tau) - 1.0)


def closed_form_shared(params: ModelParams, t):
    """Closed-form (c1, c7, c9, f3) for the alpha = mu = 0 equilibrium.

    c9 and c7 are explicit; c1 integrates eta^2*c7 from t to T, evaluated
    through a dense antiderivative so array arguments stay cheap.  Accepts
    scalar or array t in [0, T].
    """
    _require_closed_form_params(params)
    cons = derived_constants(params)
    k, b, kappa = params.k, params.b, cons.kappa
    T = params.horizon_T
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError("time outside [0, T]")
    tau = T - t_arr
    c9 = _c9_closed(params, tau)
    c7 = k / (2.0 * b * kappa) * c9 * c9 * (1.0 - np.exp(-2.0 * b * tau / kappa))

    nodes = np.linspace(0.0, T, _C1_NODES + 1)
    c9_n = _c9_closed(params, T - nodes)
    c7_n = k / (2.0 * b * kappa) * c9_n * c9_n * (1.0 - np.exp(-2.0 * b * (T - nodes) / kappa))
    anti = cumulative_integral(params.eta**2 * c7_n, T / _C1_NODES)
    c1 = anti[-1] - cubic_interpolant(nodes, anti)(t_arr)

    f3 = c9 / kappa
    if t_arr.ndim == 0:
        return float(c1), float(c7), float(c9), float(f3)
    return c1, c7, c9, f3


def feedback_rate_shared(coeffs: SharedCoefficients, t, q, q_bar, V_bar):
    """Optimal rate of one agent holding q while the crowd sits at (q_bar, V_bar)."""
    c = coeffs.coeff_at(t)
    k = coeffs.params.k
    kbar = coeffs.params.k_bar
    kappa = 2.0 * k + kbar
    c2, c5, c8, c9 = c[..., 1], c[..., 4], c[..., 7], c[..., 8]
    e0 = c2 - kbar * c2 / kappa
    eq = c8 - kbar * (2.0 * c5 + c8) / kappa
    ev = c9 - kbar * c9 / kappa
    return e0 / (2.0 * k) + c5 / k * q + eq / (2.0 * k) * q_bar + ev / (2.0 * k) * V_bar


def mean_field_rate(coeffs: SharedCoefficients, t, q_bar, V_bar):
    """Average trading rate nubar = f1 + f2*qbar + f3*Vbar."""
    f = coeffs.f_at(t)
    return f[..., 0] + f[..., 1] * q_bar + f[..., 2] * V_bar


def loadings_shared(coeffs: SharedCoefficients):
    """Equilibrium rate loadings (nu_q, nu_qbar, nu_Vbar) on the grid.

    nu_q multiplies the agent's own inventory, nu_qbar the population
    average inventory, nu_Vbar the signal.
    """
    p = coeffs.params
    k, kbar = p.k, p.k_bar
    kappa = 2.0 * k + kbar
    c5 = coeffs.coeffs[:, 4]
    c8 = coeffs.coeffs[:, 7]
    c9 = coeffs.coeffs[:, 8]
    nu_q = c5 / k
    nu_qbar = (2.0 * k * c8 - 2.0 * kbar * c5) / (2.0 * k * kappa)
    nu_vbar = c9 / kappa
    return nu_q, nu_qbar, nu_vbar
