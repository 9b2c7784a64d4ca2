"""Finite-population Euler-Maruyama simulation under the equilibrium rules.

Each of N agents steps its inventory, signal, and cash forward while the
price and the population averages respond to the average trading rate:

    dS = (mu + b*nubar) dt + sigma dW,
    dX^n = -(S + k*nu^n + kbar*nubar) nu^n dt,
    dQ^n = nu^n dt,
    shared:    dVbar = -(beta*Vbar + gammabar*nubar) dt + eta dZ,
    separate:  dV^n  = -(beta*V^n + gamma*nu^n + gammabar*nubar) dt + eta dZ^n,

with Z = rho W + sqrt(1-rho^2) W_perp and, in the separate model, an
independent idiosyncratic W_perp per agent.  Rates come from the solved
feedback coefficients; the averages an agent reacts to are either the
empirical cross-sectional means or the analytic mean-field law, per config.

Alongside the empirical averages a law twin (Qbar, Vbar driven by the
mean-field rate and the common noise only) is always evolved, which is the
N = infinity reference the empirical averages converge to.

Randomness is counter-based: path p draws from Philox(key=seed) with its
counter offset by p, so any chunking of paths, serial or parallel, produces
bit-identical output.  Per path the draw order is fixed: inventory seeds,
signal seeds, common increments, idiosyncratic increments.

Cash starts at zero on every path; the terminal objective
X_T + Q_T (S_T + V_T) - alpha Q_T^2 is unaffected by that choice up to the
additive constant X_0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mfg_separate import SeparateCoefficients
from .mfg_shared import SharedCoefficients
from .model import InitialDistribution, ModelParams
from .ode import sample_linear
from .single_agent import SingleCoefficients, rate_coefficients

# per-chunk element budget for the idiosyncratic draw block
_CHUNK_BUDGET = 20_000_000


@dataclass(frozen=True)
class SimConfig:
    n_agents: int
    n_paths: int
    seed: int
    dt: float = 1e-3
    use_empirical_averages: bool = True
    record_stride: int = 1

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")

    def steps_for(self, horizon_T: float) -> int:
        n = int(round(horizon_T / self.dt))
        if n < 1 or abs(n * self.dt - horizon_T) > 1e-9 * max(1.0, horizon_T):
            raise ValueError("dt does not divide horizon_T")
        if n % self.record_stride != 0:
            raise ValueError("record_stride does not divide the step count")
        return n


@dataclass(frozen=True)
class MarketPaths:
    """Market-level records: shape (n_paths, n_recorded) per series.

    mean_inventory and mean_signal are always the empirical cross-sectional
    averages; mean_rate is the average-rate process the dynamics actually
    used, so it is the empirical mean rate or the analytic law depending on
    use_empirical_averages.
    """

    times: np.ndarray
    price: np.ndarray
    mean_inventory: np.ndarray
    mean_signal: np.ndarray
    mean_rate: np.ndarray
    common_noise: np.ndarray      # cumulative W at the record times
    law_inventory: np.ndarray     # mean-field twin driven by common noise only
    law_signal: np.ndarray


@dataclass(frozen=True)
class AgentPaths:
    """Per-agent records: shape (n_paths, n_recorded, n_agents) per series."""

    times: np.ndarray
    inventory: np.ndarray
    signal: np.ndarray
    cash: np.ndarray
    rate: np.ndarray


def _path_generator(seed: int, path_index: int) -> np.random.Generator:
    # counter offset keeps every path on its own Philox stream
    return np.random.Generator(np.random.Philox(key=seed, counter=path_index << 128))


def _initial_draws(init: InitialDistribution, q_xi, v_xi, joint: bool):
    """Turn standard-normal seeds into (Q0, V0) draws.

    ``joint`` applies the Cholesky-style conditional split so cov_Q0V0 is
    honored; the shared model's single signal has no per-agent pairing, so
    it draws V0 marginally.
    """
    sd_q = np.sqrt(init.var_Q0)
    q0 = init.mean_Q0 + sd_q * q_xi
    if joint and init.var_Q0 > 0.0:
        slope = init.cov_Q0V0 / init.var_Q0
        resid = max(init.var_V0 - init.cov_Q0V0**2 / init.var_Q0, 0.0)
        v0 = init.mean_V0 + slope * (q0 - init.mean_Q0) + np.sqrt(resid) * v_xi
    else:
        v0 = init.mean_V0 + np.sqrt(init.var_V0) * v_xi
    return q0, v0


def _loading_table(coeffs, params: ModelParams, n_steps: int):
    """Feedback and law loadings resampled onto the simulation grid.

    Columns: intercept, own-q, crowd-q, own-V (zero for shared), crowd-V,
    then the law's f1, f2, f3.  Linear interpolation matches the
    feedback_rate_* operations exactly.
    """
    k, kbar = params.k, params.k_bar
    c = coeffs.coeffs
    f = coeffs.f
    if isinstance(coeffs, SharedCoefficients):
        table = np.column_stack(
            [
                (c[:, 1] - kbar * f[:, 0]) / (2.0 * k),
                c[:, 4] / k,
                (c[:, 7] - kbar * f[:, 1]) / (2.0 * k),
                np.zeros(len(c)),
                (c[:, 8] - kbar * f[:, 2]) / (2.0 * k),
                f[:, 0],
                f[:, 1],
                f[:, 2],
            ]
        )
    else:
        g = params.gamma
        table = np.column_stack(
            [
                (c[:, 1] - g * c[:, 3] - kbar * f[:, 0]) / (2.0 * k),
                (2.0 * c[:, 5] - g * c[:, 10]) / (2.0 * k),
                (c[:, 9] - g * c[:, 12] - kbar * f[:, 1]) / (2.0 * k),
                (c[:, 10] - 2.0 * g * c[:, 7]) / (2.0 * k),
                (c[:, 11] - g * c[:, 14] - kbar * f[:, 2]) / (2.0 * k),
                f[:, 0],
                f[:, 1],
                f[:, 2],
            ]
        )
    sim_times = np.linspace(0.0, params.horizon_T, n_steps + 1)
    return sample_linear(coeffs.times, table, sim_times), sim_times


def _check_grid(coeffs, cfg: SimConfig, params: ModelParams) -> None:
    if coeffs.grid.dt > cfg.dt * (1.0 + 1e-9):
        raise ValueError("coefficient grid is coarser than the simulation dt")


def _chunks(n_paths: int, per_path_elems: int, chunk_size: int | None):
    if chunk_size is None:
        chunk_size = max(1, _CHUNK_BUDGET // max(per_path_elems, 1))
    start = 0
    while start < n_paths:
        stop = min(start + chunk_size, n_paths)
        yield start, stop
        start = stop


def _simulate_crowd(
    params: ModelParams,
    coeffs,
    init: InitialDistribution,
    cfg: SimConfig,
    shared_signal: bool,
    chunk_size: int | None,
):
    """Common core for the shared- and separate-signal simulations."""
    _check_grid(coeffs, cfg, params)
    n_steps = cfg.steps_for(params.horizon_T)
    N, P = cfg.n_agents, cfg.n_paths
    dt = cfg.dt
    sqdt = np.sqrt(dt)
    stride = cfg.record_stride
    n_rec = n_steps // stride
    table, sim_times = _loading_table(coeffs, params, n_steps)
    rec_times = sim_times[::stride]

    p_ = params
    gsum = p_.gamma + p_.gamma_bar
    rho_c = np.sqrt(1.0 - p_.rho**2)

    market = MarketPaths(
        times=rec_times,
        price=np.empty((P, n_rec + 1)),
        mean_inventory=np.empty((P, n_rec + 1)),
        mean_signal=np.empty((P, n_rec + 1)),
        mean_rate=np.empty((P, n_rec + 1)),
        common_noise=np.empty((P, n_rec + 1)),
        law_inventory=np.empty((P, n_rec + 1)),
        law_signal=np.empty((P, n_rec + 1)),
    )
    agents = AgentPaths(
        times=rec_times,
        inventory=np.empty((P, n_rec + 1, N)),
        signal=np.empty((P, n_rec + 1, N)),
        cash=np.empty((P, n_rec + 1, N)),
        rate=np.empty((P, n_rec + 1, N)),
    )

    per_path = n_steps * (N if not shared_signal else 1) + n_steps + 2 * N
    for lo, hi in _chunks(P, per_path, chunk_size):
        pc = hi - lo
        Q = np.empty((pc, N))
        V = np.empty((pc, N))       # shared: column-broadcast common signal
        W = np.empty((pc, n_steps))
        if shared_signal:
            Wp = np.empty((pc, n_steps))
        else:
            Wp = np.empty((pc, n_steps, N))
        for i, p_idx in enumerate(range(lo, hi)):
            gen = _path_generator(cfg.seed, p_idx)
            q_xi = gen.standard_normal(N)
            if shared_signal:
                v_xi = gen.standard_normal(1)[0]
                q0, v0 = _initial_draws(init, q_xi, v_xi, joint=False)
                V[i, :] = v0
            else:
                v_xi = gen.standard_normal(N)
                q0, v0 = _initial_draws(init, q_xi, v_xi, joint=True)
                V[i, :] = v0
            Q[i, :] = q0
            W[i, :] = gen.standard_normal(n_steps)
            Wp[i] = gen.standard_normal(Wp.shape[1:])
        W *= sqdt
        Wp *= sqdt

        X = np.zeros((pc, N))
        S = np.full(pc, init.S0)
        q_bar = Q.mean(axis=1)
        v_bar = V[:, 0].copy() if shared_signal else V.mean(axis=1)
        q_law = np.full(pc, init.mean_Q0)
        v_law = V[:, 0].copy() if shared_signal else np.full(pc, init.mean_V0)
        w_cum = np.zeros(pc)

        sl = slice(lo, hi)
        for step in range(n_steps + 1):
            (l0, lq, lqb, lv, lvb, f1, f2, f3) = table[step]
            if cfg.use_empirical_averages:
                eff_q, eff_v = q_bar, v_bar
            else:
                eff_q, eff_v = q_law, v_law
            nu = (
                l0
                + lq * Q
                + (lqb * eff_q + lvb * eff_v)[:, None]
                + lv * V
            )
            nu_emp = nu.mean(axis=1)
            nu_law = f1 + f2 * q_law + f3 * v_law
            nu_eff = nu_emp if cfg.use_empirical_averages else nu_law

            if step % stride == 0:
                r = step // stride
                agents.inventory[sl, r] = Q
                agents.signal[sl, r] = V
                agents.cash[sl, r] = X
                agents.rate[sl, r] = nu
                market.price[sl, r] = S
                market.mean_inventory[sl, r] = q_bar
                market.mean_signal[sl, r] = v_bar
                market.mean_rate[sl, r] = nu_eff
                market.common_noise[sl, r] = w_cum
                market.law_inventory[sl, r] = q_law
                market.law_signal[sl, r] = v_law
            if step == n_steps:
                break

            dW = W[:, step]
            # cash settles at the pre-step price (left-point rule)
            X -= (S[:, None] + p_.k * nu + p_.k_bar * nu_eff[:, None]) * nu * dt
            S += (p_.mu + p_.b * nu_eff) * dt + p_.sigma * dW
            if shared_signal:
                dZ = p_.rho * dW + rho_c * Wp[:, step]
                dv = -(p_.beta * V[:, 0] + p_.gamma_bar * nu_eff) * dt + p_.eta * dZ
                V += dv[:, None]
                v_law += -(p_.beta * v_law + p_.gamma_bar * nu_law) * dt + p_.eta * dZ
            else:
                dZ = p_.rho * dW[:, None] + rho_c * Wp[:, step]
                V += (
                    -(p_.beta * V + p_.gamma * nu + p_.gamma_bar * nu_eff[:, None]) * dt
                    + p_.eta * dZ
                )
                v_law += (
                    -(p_.beta * v_law + gsum * nu_law) * dt
                    + p_.rho * p_.eta * dW
                )
            Q += nu * dt
            # exact bookkeeping: the mean inventory moves by the mean rate
            q_bar = q_bar + nu_emp * dt
            q_law = q_law + nu_law * dt
            v_bar = V.mean(axis=1) if not shared_signal else V[:, 0]
            w_cum = w_cum + dW

    return market, agents


def simulate_shared(
    params: ModelParams,
    coeffs: SharedCoefficients,
    init: InitialDistribution,
    cfg: SimConfig,
    chunk_size: int | None = None,
):
    """Simulate N agents reacting to one common signal.

    Returns (MarketPaths, AgentPaths); the agents' signal column repeats
    the common signal so the two models share one record layout.
    """
    return _simulate_crowd(params, coeffs, init, cfg, True, chunk_size)


def simulate_separate(
    params: ModelParams,
    coeffs: SeparateCoefficients,
    init: InitialDistribution,
    cfg: SimConfig,
    chunk_size: int | None = None,
):
    """Simulate N agents, each with an idiosyncratic signal component."""
    return _simulate_crowd(params, coeffs, init, cfg, False, chunk_size)


def simulate_single(
    params: ModelParams,
    coeffs: SingleCoefficients,
    init: InitialDistribution,
    cfg: SimConfig,
    control_scale: float = 1.0,
    chunk_size: int | None = None,
):
    """Simulate the one-agent model, optionally scaling the feedback rate.

    ``control_scale`` multiplies the optimal rate (0 disables trading),
    which is the perturbation used by the optimality cross-checks.  Common
    random numbers across scales come from the shared seed layout.
    """
    if cfg.n_agents != 1:
        raise ValueError("single-agent simulation requires n_agents = 1")
    _check_grid(coeffs, cfg, params)
    n_steps = cfg.steps_for(params.horizon_T)
    P = cfg.n_paths
    dt = cfg.dt
    sqdt = np.sqrt(dt)
    stride = cfg.record_stride
    n_rec = n_steps // stride

    k = params.k
    pieces = np.column_stack(rate_coefficients(coeffs))
    sim_times = np.linspace(0.0, params.horizon_T, n_steps + 1)
    table = sample_linear(coeffs.grid.t_values, pieces, sim_times)
    rec_times = sim_times[::stride]
    rho_c = np.sqrt(1.0 - params.rho**2)

    market = MarketPaths(
        times=rec_times,
        price=np.empty((P, n_rec + 1)),
        mean_inventory=np.empty((P, n_rec + 1)),
        mean_signal=np.empty((P, n_rec + 1)),
        mean_rate=np.empty((P, n_rec + 1)),
        common_noise=np.empty((P, n_rec + 1)),
        law_inventory=np.empty((P, n_rec + 1)),
        law_signal=np.empty((P, n_rec + 1)),
    )
    agents = AgentPaths(
        times=rec_times,
        inventory=np.empty((P, n_rec + 1, 1)),
        signal=np.empty((P, n_rec + 1, 1)),
        cash=np.empty((P, n_rec + 1, 1)),
        rate=np.empty((P, n_rec + 1, 1)),
    )

    per_path = 2 * n_steps + 2
    for lo, hi in _chunks(P, per_path, chunk_size):
        pc = hi - lo
        Q = np.empty(pc)
        V = np.empty(pc)
        W = np.empty((pc, n_steps))
        Wp = np.empty((pc, n_steps))
        for i, p_idx in enumerate(range(lo, hi)):
            gen = _path_generator(cfg.seed, p_idx)
            q_xi = gen.standard_normal(1)[0]
            v_xi = gen.standard_normal(1)[0]
            Q[i], V[i] = _initial_draws(init, q_xi, v_xi, joint=True)
            W[i, :] = gen.standard_normal(n_steps)
            Wp[i, :] = gen.standard_normal(n_steps)
        W *= sqdt
        Wp *= sqdt

        X = np.zeros(pc)
        S = np.full(pc, init.S0)
        w_cum = np.zeros(pc)
        sl = slice(lo, hi)
        for step in range(n_steps + 1):
            m0, mq, mv = table[step]
            nu = control_scale * (m0 + mq * Q + mv * V)
            if step % stride == 0:
                r = step // stride
                agents.inventory[sl, r, 0] = Q
                agents.signal[sl, r, 0] = V
                agents.cash[sl, r, 0] = X
                agents.rate[sl, r, 0] = nu
                market.price[sl, r] = S
                market.mean_inventory[sl, r] = Q
                market.mean_signal[sl, r] = V
                market.mean_rate[sl, r] = nu
                market.common_noise[sl, r] = w_cum
                market.law_inventory[sl, r] = Q
                market.law_signal[sl, r] = V
            if step == n_steps:
                break
            dW = W[:, step]
            X -= (S + k * nu) * nu * dt
            S += (params.mu + params.b * nu) * dt + params.sigma * dW
            dZ = params.rho * dW + rho_c * Wp[:, step]
            V += -(params.beta * V + params.gamma * nu) * dt + params.eta * dZ
            Q += nu * dt
            w_cum = w_cum + dW

    return market, agents


def empirical_cross_moments(agent_paths: AgentPaths, t):
    """Cross-sectional mean and unbiased covariance of (Q, V) at time t.

    Returns arrays of shape (n_paths, 2) and (n_paths, 2, 2).
    """
    times = agent_paths.times
    idx = np.nonzero(np.isclose(times, t, rtol=0.0, atol=1e-9))[0]
    if len(idx) == 0:
        raise ValueError(f"time {t} is not on the recorded grid")
    j = int(idx[0])
    N = agent_paths.inventory.shape[2]
    if N < 2:
        raise ValueError("covariance needs at least 2 agents")
    q = agent_paths.inventory[:, j, :]
    v = agent_paths.signal[:, j, :]
    mean = np.stack([q.mean(axis=1), v.mean(axis=1)], axis=1)
    dq = q - mean[:, 0, None]
    dv = v - mean[:, 1, None]
    cov = np.empty((q.shape[0], 2, 2))
    cov[:, 0, 0] = (dq * dq).sum(axis=1) / (N - 1)
    cov[:, 1, 1] = (dv * dv).sum(axis=1) / (N - 1)
    cov[:, 0, 1] = cov[:, 1, 0] = (dq * dv).sum(axis=1) / (N - 1)
    return mean, cov


def objective_sample(agent_paths: AgentPaths, market_paths: MarketPaths, params: ModelParams):
    """Terminal objective X_T + Q_T (S_T + V_T) - alpha Q_T^2 per (path, agent)."""
    q = agent_paths.inventory[:, -1, :]
    v = agent_paths.signal[:, -1, :]
    x = agent_paths.cash[:, -1, :]
    s = market_paths.price[:, -1]
    return x + q * (s[:, None] + v) - params.alpha * q * q
