"""Single-agent optimal trading with a private mean-reverting signal.

The value function takes the form H(t,x,q,S,V) = x + qS + h(t,q,V) with

    h(t,q,V) = c1 + c2*q + c3*V + c4*q^2 + c5*V^2 + c6*q*V,

which reduces dynamic programming to six coupled Riccati-type ODEs with
terminal data c4(T) = -alpha, c6(T) = 1, all others 0.  The optimal trading
rate is affine in the state,

    nu*(t,q,V) = [c2 - g*c3 + (b + 2*c4 - g*c6) q + (c6 - 2*g*c5) V] / (2k),

writing g for the own-trade signal impact gamma.  When mu = 0 the linear
coefficients c2, c3 vanish identically and nu* is odd in (q, V).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, TimeGrid, validate
from .ode import VectorField, integrate_backward, sample_linear

__all__ = [
    "SingleCoefficients",
    "solve_single",
    "feedback_rate",
    "loadings",
    "rate_coefficients",
    "value_function",
    "hjb_quadratic_fit",
    "hjb_residual",
]


@dataclass(frozen=True)
class SingleCoefficients:
    """Backward-solved value-function coefficients on a uniform grid.

    `coeffs` has shape (n_steps+1, 6); column i holds c_{i+1}.  The basis
    order is (1, q, V, q^2, V^2, q*V).
    """

    params: ModelParams
    grid: TimeGrid
    coeffs: np.ndarray

    def coeff_at(self, t):
        """Linearly interpolated coefficient row(s) at time(s) t."""
        return sample_linear(self.grid.t_values, self.coeffs, t)

    @property
    def c1(self):
        return self.coeffs[:, 0]

    @property
    def c2(self):
        return self.coeffs[:, 1]

    @property
    def c3(self):
        return self.coeffs[:, 2]

    @property
    def c4(self):
        return self.coeffs[:, 3]

    @property
    def c5(self):
        return self.coeffs[:, 4]

    @property
    def c6(self):
        return self.coeffs[:, 5]


def _rhs(params: ModelParams):
    mu, eta, beta = params.mu, params.eta, params.beta
    g, b, k = params.gamma, params.b, params.k

    def rhs(t, c):
        c1, c2, c3, c4, c5, c6 = c
        m0 = c2 - g * c3
        mq = b + 2.0 * c4 - g * c6
        mv = c6 - 2.0 * g * c5
        return np.array(
            [
                -(eta * eta * c5 + m0 * m0 / (4.0 * k)),
                -(mu + m0 * mq / (2.0 * k)),
                beta * c3 - m0 * mv / (2.0 * k),
                -(mq * mq / (4.0 * k)),
                2.0 * beta * c5 - mv * mv / (4.0 * k),
                beta * c6 - mv * mq / (2.0 * k),
            ]
        )

    return rhs


def solve_single(params: ModelParams, grid: TimeGrid | None = None) -> SingleCoefficients:
    """Integrate the six-coefficient terminal-value system backward by RK4."""
    report = validate(params)
    if report:
        raise ValueError("invalid parameters: " + "; ".join(report))
    if grid is None:
        grid = TimeGrid(params.horizon_T)
    terminal = np.array([0.0, 0.0, 0.0, -params.alpha, 0.0, 1.0])
    field = VectorField(dimension=6, rhs=_rhs(params))
    coeffs = integrate_backward(field, terminal, grid)
    return SingleCoefficients(params=params, grid=grid, coeffs=coeffs)


def _affine_pieces(coeff_values: np.ndarray, params: ModelParams):
    """Intercept and state loadings of the optimal rate from coefficient rows."""
    c = np.asarray(coeff_values)
    g, two_k = params.gamma, 2.0 * params.k
    intercept = (c[..., 1] - g * c[..., 2]) / two_k
    slope_q = (params.b + 2.0 * c[..., 3] - g * c[..., 5]) / two_k
    slope_v = (c[..., 5] - 2.0 * g * c[..., 4]) / two_k
    return intercept, slope_q, slope_v


def feedback_rate(coeffs: SingleCoefficients, t, q, V):
    """Optimal trading rate at (t, q, V); t interpolated linearly on the grid."""
    intercept, slope_q, slope_v = _affine_pieces(coeffs.coeff_at(t), coeffs.params)
    return intercept + slope_q * q + slope_v * V


def loadings(coeffs: SingleCoefficients):
    """(nu_q, nu_V) loading paths of the optimal rate on the grid."""
    _, slope_q, slope_v = _affine_pieces(coeffs.coeffs, coeffs.params)
    return slope_q, slope_v


def rate_coefficients(coeffs: SingleCoefficients):
    """(intercept, nu_q, nu_V) paths of the optimal rate on the grid."""
    return _affine_pieces(coeffs.coeffs, coeffs.params)


def value_function(coeffs: SingleCoefficients, t, x, q, S, V):
    """H(t,x,q,S,V) = x + qS + h(t,q,V) with interpolated coefficients."""
    c = coeffs.coeff_at(t)
    h = (
        c[..., 0]
        + c[..., 1] * q
        + c[..., 2] * V
        + c[..., 3] * q * q
        + c[..., 4] * V * V
        + c[..., 5] * q * V
    )
    return x + q * S + h


def _generator(coeffs: SingleCoefficients, t, x, q, S, V, nu):
    """Controlled generator applied to H, evaluated from analytic derivatives.

    H = x + qS + h gives H_x = 1, H_q = S + h_q, H_S = q, H_V = h_V,
    H_SS = H_SV = 0 and H_VV = 2*c5; only h carries time dependence.
    """
    p = coeffs.params
    c = coeffs.coeff_at(t)
    h_q = c[..., 1] + 2.0 * c[..., 3] * q + c[..., 5] * V
    h_v = c[..., 2] + 2.0 * c[..., 4] * V + c[..., 5] * q
    return (
        -(S + p.k * nu) * nu
        + nu * (S + h_q)
        + (p.mu + p.b * nu) * q
        - (p.beta * V + p.gamma * nu) * h_v
        + 0.5 * p.eta * p.eta * (2.0 * c[..., 4])
    )


def hjb_quadratic_fit(coeffs: SingleCoefficients, t, x, q, S, V):
    """Coefficients (a2, a1, a0) of nu -> generator, fitted from three points.

    The generator is exactly quadratic in nu, so evaluating it at
    nu = -1, 0, 1 recovers the polynomial without differentiating anything;
    a2 must equal -k and the maximizer -a1/(2*a2) must equal feedback_rate.
    """
    g_m = _generator(coeffs, t, x, q, S, V, -1.0)
    g_0 = _generator(coeffs, t, x, q, S, V, 0.0)
    g_p = _generator(coeffs, t, x, q, S, V, 1.0)
    a2 = 0.5 * (g_p + g_m) - g_0
    a1 = 0.5 * (g_p - g_m)
    return a2, a1, g_0


def hjb_residual(coeffs: SingleCoefficients, t, x, q, S, V, fd_step: float = 1e-5):
    """Dynamic-programming residual d_t H + sup_nu (generator) at one point.

    The supremum is the vertex value of the fitted quadratic; d_t H is a
    central finite difference of the interpolated value function.  Requires
    t - fd_step >= 0 and t + fd_step <= horizon_T.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    T = coeffs.grid.horizon_T
    if t - fd_step < 0 or t + fd_step > T:
        raise ValueError("t must lie in (fd_step, horizon_T - fd_step)")
    a2, a1, a0 = hjb_quadratic_fit(coeffs, t, x, q, S, V)
    supremum = a0 - a1 * a1 / (4.0 * a2)
    h_plus = value_function(coeffs, t + fd_step, x, q, S, V)
    h_minus = value_function(coeffs, t - fd_step, x, q, S, V)
    dt_h = (h_plus - h_minus) / (2.0 * fd_step)
    return dt_h + supremum
