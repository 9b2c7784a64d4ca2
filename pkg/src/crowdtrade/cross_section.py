"""Cross-sectional moments of the population in equilibrium.

Stack each agent's inventory and signal as Y^n = (Q^n, V^n) and write
Ybar = (Qbar, Vbar) for the population averages.  When everybody trades the
separate-signals equilibrium feedback rule, the pair obeys linear dynamics

    dY^n_t = (a_t + B_t Y^n_t + (C_t - B_t) Ybar_t) dt + Theta dZ^n_t,
    dYbar_t = (a_t + C_t Ybar_t) dt + rho*Theta dW_t,

with Theta = (0, eta)' and

    a_t = f1(t) * (1, -(gamma+gammabar))',
    B_t = [[nu_q,          nu_V         ],
           [-gamma*nu_q,   -(beta+gamma*nu_V)]],
    C_t = B-pattern with nu_q+nu_qbar, nu_V+nu_Vbar and gamma+gammabar.

Let Phi and Psi be the fundamental matrices of C and B.  The population
mean rides the common noise,

    Ybar_t = Phi_t (Ybar_0 + int_0^t Phi_u^{-1} a_u du
                    + rho int_0^t Phi_u^{-1} Theta dW_u),

while the cross-sectional covariance is deterministic,

    Sigma_t = Psi_t Sigma_0 Psi_t' +
              (1-rho^2) Psi_t int_0^t Psi_u^{-1} Theta Theta' Psi_u^{-T} du Psi_t',

shrinking toward the rho = +-1 limit Psi_t Sigma_0 Psi_t' as signals become
shared.  The asset-price variance picks up a drift-feedback correction,

    Var[S_t] = int_0^t (rho*eta*b [1 0] Phi_t Phi_u^{-1} [0 1]' + sigma)^2 du,

equal to sigma^2 t when rho = 0 or b = 0.  With alpha = mu = gamma = 0 all
of these admit closed forms, used as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mfg_separate import SeparateCoefficients, loadings_separate
from .model import (
    ModelParams,
    SingularParameterError,
    TimeGrid,
    derived_constants,
)
from .ode import (
    MatrixPath,
    cubic_interpolant,
    cumulative_integral,
    fundamental_matrix,
    integrate_nodes,
)


@dataclass(frozen=True)
class MomentSystem:
    """Linear-dynamics data (a, B, C, Theta) sampled on the solver grid."""

    params: ModelParams
    grid: TimeGrid
    a: np.ndarray       # (n+1, 2)
    B: np.ndarray       # (n+1, 2, 2)
    C: np.ndarray       # (n+1, 2, 2)
    theta: np.ndarray   # (2,)


@dataclass(frozen=True)
class PopulationMoments:
    """Mean path (per common-noise draw) and covariance path on a grid."""

    grid: TimeGrid
    mean_path: np.ndarray
    cov_path: np.ndarray


def build_moment_system(coeffs: SeparateCoefficients) -> MomentSystem:
    """Assemble a_t, B_t, C_t from a solved separate-signals equilibrium."""
    p = coeffs.params
    g, gsum = p.gamma, p.gamma + p.gamma_bar
    nu_q, nu_qbar, nu_v, nu_vbar = loadings_separate(coeffs)
    n = len(nu_q)

    a = np.empty((n, 2))
    a[:, 0] = coeffs.f[:, 0]
    a[:, 1] = -gsum * coeffs.f[:, 0]

    B = np.empty((n, 2, 2))
    B[:, 0, 0] = nu_q
    B[:, 0, 1] = nu_v
    B[:, 1, 0] = -g * nu_q
    B[:, 1, 1] = -(p.beta + g * nu_v)

    C = np.empty((n, 2, 2))
    cq = nu_q + nu_qbar
    cv = nu_v + nu_vbar
    C[:, 0, 0] = cq
    C[:, 0, 1] = cv
    C[:, 1, 0] = -gsum * cq
    C[:, 1, 1] = -(p.beta + gsum * cv)

    return MomentSystem(
        params=p, grid=coeffs.grid, a=a, B=B, C=C, theta=np.array([0.0, p.eta])
    )


def fundamental_pair(system: MomentSystem, grid: TimeGrid | None = None):
    """Fundamental matrices (Phi from C, Psi from B) with inverses.

    The node-sampled coefficient matrices are lifted to callables by cubic
    interpolation so the integrator's half-step stages keep full order.
    """
    if grid is None:
        grid = system.grid
    times = system.grid.t_values
    phi = fundamental_matrix(cubic_interpolant(times, system.C), grid)
    psi = fundamental_matrix(cubic_interpolant(times, system.B), grid)
    return phi, psi


def mean_path(system: MomentSystem, phi: MatrixPath, W_increments, Y0_bar):
    """Population mean Ybar along one or many common-noise paths.

    ``W_increments`` has shape (n_steps,) for a single path or
    (n_paths, n_steps); entries are Brownian increments over each grid step.
    Both time integrals use left-point Ito sums.  Returns (n_steps+1, 2) or
    (n_paths, n_steps+1, 2).
    """
    times = phi.grid.t_values
    n = len(times) - 1
    dt = phi.grid.dt
    dW = np.asarray(W_increments, dtype=float)
    single = dW.ndim == 1
    dW2 = dW[None, :] if single else dW
    if dW2.shape[-1] != n:
        raise ValueError(
            f"expected {n} Brownian increments per path, got {dW2.shape[-1]}"
        )
    y0 = np.asarray(Y0_bar, dtype=float)

    drift = np.einsum("nij,nj->ni", phi.inverses, system.a)
    drift_sum = np.zeros((n + 1, 2))
    np.cumsum(drift[:-1] * dt, axis=0, out=drift_sum[1:])

    shock = phi.inverses @ system.theta
    noise_sum = np.zeros((dW2.shape[0], n + 1, 2))
    np.cumsum(shock[None, :-1, :] * dW2[:, :, None], axis=1, out=noise_sum[:, 1:, :])

    inner = y0 + drift_sum + system.params.rho * noise_sum
    out = np.einsum("nij,pnj->pni", phi.values, inner)
    return out[0] if single else out


def covariance_path(psi: MatrixPath, Sigma0, params: ModelParams) -> np.ndarray:
    """Cross-sectional covariance Sigma_t at every grid node, symmetrized."""
    S0 = np.asarray(Sigma0, dtype=float)
    theta = np.array([0.0, params.eta])
    spread = psi.inverses @ theta                       # (n+1, 2)
    outer = spread[:, :, None] * spread[:, None, :]     # Psi^-1 Theta Theta' Psi^-T
    accum = cumulative_integral(outer, psi.grid.dt)
    core = S0 + (1.0 - params.rho**2) * accum
    cov = psi.values @ core @ np.swapaxes(psi.values, 1, 2)
    return 0.5 * (cov + np.swapaxes(cov, 1, 2))


def closed_form_covariance(params: ModelParams, Sigma0, t):
    """Closed-form (Sigma_Q, Sigma_V, Sigma_QV) for alpha = mu = gamma = 0.

    Requires beta > 0; the numeric covariance_path covers beta = 0.
    Accepts scalar or array t.
    """
    if params.alpha != 0.0 or params.mu != 0.0 or params.gamma != 0.0:
        raise ValueError("closed form requires alpha = 0, mu = 0 and gamma = 0")
    if params.beta == 0.0:
        raise SingularParameterError(
            "closed form undefined: beta must be nonzero"
        )
    S0 = np.asarray(Sigma0, dtype=float)
    s0_q, s0_v, s0_qv = S0[0, 0], S0[1, 1], S0[0, 1]
    beta, k, eta, rho = params.beta, params.k, params.eta, params.rho
    T = params.horizon_T
    t = np.asarray(t, dtype=float)
    resid = 1.0 - rho**2
    ebT = np.exp(-beta * T)
    ebt = np.exp(-beta * t)

    sigma_q = (
        s0_q
        + ebT / k * t * s0_qv
        + ebT**2 / (4.0 * k * k) * t * t * s0_v
        + resid
        * eta**2
        * ebT**2
        / (16.0 * beta**3 * k * k)
        * (np.exp(2.0 * beta * t) - 1.0 - 2.0 * beta * t - 2.0 * beta**2 * t * t)
    )
    sigma_v = ebt**2 * s0_v + resid * eta**2 / (2.0 * beta) * (1.0 - ebt**2)
    sigma_qv = (
        ebt * s0_qv
        + ebT / (2.0 * k) * t * ebt * s0_v
        + resid
        * eta**2
        * ebT
        / (4.0 * beta**2 * k)
        * (np.sinh(beta * t) - beta * t * ebt)
    )
    return sigma_q, sigma_v, sigma_qv


def _variance_pieces(phi: MatrixPath, params: ModelParams):
    """Cumulative integrals feeding the price-variance quadratic expansion.

    With p_u, r_u the second column of Phi_u^{-1}, returns cumulative
    integrals of (p^2, p*r, r^2, p, r) over [0, t_j] for every node j.
    """
    p = phi.inverses[:, 0, 1]
    r = phi.inverses[:, 1, 1]
    stack = np.column_stack([p * p, p * r, r * r, p, r])
    return cumulative_integral(stack, phi.grid.dt)


def _variance_body(phi: MatrixPath, params: ModelParams, pieces, j: int):
    amp = params.rho * params.eta * params.b
    f00, f01 = phi.values[j, 0, 0], phi.values[j, 0, 1]
    ipp, ipr, irr, ip, ir = pieces[j]
    quad = amp * amp * (f00 * f00 * ipp + 2.0 * f00 * f01 * ipr + f01 * f01 * irr)
    cross = 2.0 * params.sigma * amp * (f00 * ip + f01 * ir)
    return quad + cross


def price_variance(system: MomentSystem, phi: MatrixPath, params: ModelParams, t):
    """Asset-price variance at time t.

    The feedback part of the integrand lives on the path grid, so it is
    evaluated at the node nearest t; the sigma^2*t part is analytic in the
    requested t, making rho = 0 and b = 0 exact.
    """
    T = phi.grid.horizon_T
    if not 0.0 <= t <= T:
        raise ValueError(f"time {t} outside [0, {T}]")
    j = int(round(t / phi.grid.dt))
    pieces = _variance_pieces(phi, params)
    return float(_variance_body(phi, params, pieces, j) + params.sigma**2 * t)


def price_variance_curve(system: MomentSystem, phi: MatrixPath, params: ModelParams):
    """Asset-price variance at every grid node."""
    pieces = _variance_pieces(phi, params)
    amp = params.rho * params.eta * params.b
    f00 = phi.values[:, 0, 0]
    f01 = phi.values[:, 0, 1]
    ipp, ipr, irr, ip, ir = pieces.T
    quad = amp * amp * (f00 * f00 * ipp + 2.0 * f00 * f01 * ipr + f01 * f01 * irr)
    cross = 2.0 * params.sigma * amp * (f00 * ip + f01 * ir)
    return quad + cross + params.sigma**2 * phi.grid.t_values


# quadrature panels for the closed-form price-variance integral
_VAR_PANELS = 2048


def price_variance_closed(params: ModelParams, t) -> float:
    """Closed-form price variance for alpha = mu = gamma = 0.

    Integrates the explicit kernel by Simpson panels; the sigma^2*t part is
    carried analytically so rho = 0 returns sigma^2*t exactly.
    """
    if params.alpha != 0.0 or params.mu != 0.0 or params.gamma != 0.0:
        raise ValueError("closed form requires alpha = 0, mu = 0 and gamma = 0")
    cons = derived_constants(params)
    if cons.omega == 0.0:
        raise SingularParameterError(
            "closed form undefined: omega must be nonzero (kappa*beta = b)"
        )
    T = params.horizon_T
    if not 0.0 <= t <= T:
        raise ValueError(f"time {t} outside [0, {T}]")
    if t == 0.0:
        return 0.0
    z, om, kappa = cons.z, cons.omega, cons.kappa
    rho, eta, sigma, b = params.rho, params.eta, params.sigma, params.b

    u = np.linspace(0.0, t, _VAR_PANELS + 1)
    kernel = (
        2.0 * rho * eta * z * (1.0 - np.exp(-b * (t - u) / kappa))
        / ((1.0 + 2.0 * z) * np.exp(om * (T - u)) - 1.0)
    )
    body = integrate_nodes(kernel * kernel + 2.0 * sigma * kernel, t / _VAR_PANELS)
    return float(body + sigma**2 * t)
