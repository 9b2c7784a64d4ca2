"""Figure data builders: the nine bundled plots and their CSV series.

Each builder computes the data behind one figure at its canonical
parameter set, returns the CSV header and rows, and carries a draw
callback used when PNG rendering is requested.  Simulation-backed figures
take a seed so reruns stay byte-identical.

Figure index:
  1 one agent: rate loadings on inventory and signal
  2 one agent: simulated rate decomposition along one path
  3 shared signal: equilibrium loadings
  4 shared signal: crowd-inventory loading under impact sweeps
  5 separate signals: equilibrium loadings
  6 separate signals: crowd loadings under impact sweeps
  7 separate signals: 50-agent simulated crowd
  8 mean-field cross-sectional variances and correlation
  9 mid-price variance through time for several signal correlations
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .cross_section import (
    build_moment_system,
    covariance_path,
    fundamental_pair,
    price_variance_curve,
)
from .mfg_separate import loadings_separate, solve_separate
from .mfg_shared import loadings_shared, solve_shared
from .model import InitialDistribution, ModelParams, TimeGrid
from .ode import sample_linear
from .presets import BASE_SEPARATE, BASE_SHARED, BASE_SINGLE, DEMO_INIT, STRONG_IMPACT
from .simulator import SimConfig, simulate_separate, simulate_single
from .single_agent import rate_coefficients, solve_single

FIGURE_IDS = tuple(range(1, 10))
DEFAULT_SEEDS = {2: 2, 7: 7}

_GRID = TimeGrid(1.0)
_STRIDE = _GRID.n_steps // 1000  # figure CSVs sample about 1000 nodes


@dataclass(frozen=True)
class FigureData:
    fig_id: int
    header: tuple
    rows: list
    draw: Callable


def _thin(values: np.ndarray) -> np.ndarray:
    return values[::_STRIDE]


def figure1() -> FigureData:
    coeffs = solve_single(BASE_SINGLE, _GRID)
    _, nu_q, nu_v = rate_coefficients(coeffs)
    t = _thin(_GRID.t_values)
    nu_q, nu_v = _thin(nu_q), _thin(nu_v)

    def draw(fig):
        ax_q, ax_v = fig.subplots(1, 2)
        ax_q.plot(t, nu_q)
        ax_q.set(xlabel="time", ylabel="loading on own inventory")
        ax_v.plot(t, nu_v)
        ax_v.set(xlabel="time", ylabel="loading on own signal")
        fig.suptitle("Optimal rate loadings, one agent")

    return FigureData(1, ("t", "nu_q", "nu_V"), list(zip(t, nu_q, nu_v)), draw)


def figure2(seed: int = DEFAULT_SEEDS[2]) -> FigureData:
    coeffs = solve_single(BASE_SINGLE, _GRID)
    init = InitialDistribution(0.0, 0.0, 0.0, 0.0, 0.0, 100.0)
    cfg = SimConfig(n_agents=1, n_paths=1, seed=seed)
    market, agents = simulate_single(BASE_SINGLE, coeffs, init, cfg)
    t = agents.times
    q = agents.inventory[0, :, 0]
    v = agents.signal[0, :, 0]
    nu = agents.rate[0, :, 0]
    pieces = sample_linear(
        _GRID.t_values, np.column_stack(rate_coefficients(coeffs)), t
    )
    from_q = pieces[:, 1] * q
    from_v = pieces[:, 2] * v
    header = ("t", "Q", "V", "nu", "nu_from_Q", "nu_from_V")
    rows = list(zip(t, q, v, nu, from_q, from_v))

    def draw(fig):
        axes = fig.subplots(1, 3)
        for ax, series, label in (
            (axes[0], from_q, "inventory part of rate"),
            (axes[1], from_v, "signal part of rate"),
            (axes[2], nu, "total rate"),
        ):
            ax.plot(t, series)
            ax.set(xlabel="time", ylabel=label)
        fig.suptitle("Simulated rate decomposition, one agent")

    return FigureData(2, header, rows, draw)


def figure3() -> FigureData:
    coeffs = solve_shared(BASE_SHARED, _GRID)
    nu_q, nu_qbar, nu_vbar = (_thin(x) for x in loadings_shared(coeffs))
    t = _thin(_GRID.t_values)
    header = ("t", "nu_q", "nu_qbar", "nu_Vbar")

    def draw(fig):
        axes = fig.subplots(1, 3)
        for ax, series, label in (
            (axes[0], nu_q, "loading on own inventory"),
            (axes[1], nu_qbar, "loading on crowd inventory"),
            (axes[2], nu_vbar, "loading on shared signal"),
        ):
            ax.plot(t, series)
            ax.set(xlabel="time", ylabel=label)
        fig.suptitle("Equilibrium rate loadings, shared signal")

    return FigureData(3, header, list(zip(t, nu_q, nu_qbar, nu_vbar)), draw)


_SHARED_SWEEPS = (
    ("b", np.linspace(0.0, 5e-2, 5)),
    ("gamma_bar", np.linspace(0.0, 0.5, 5)),
)


def figure4() -> FigureData:
    t = _thin(_GRID.t_values)
    rows = []
    curves = {}
    for name, values in _SHARED_SWEEPS:
        for value in values:
            params = replace(BASE_SHARED, **{name: float(value)})
            _, nu_qbar, _ = loadings_shared(solve_shared(params, _GRID))
            thin = _thin(nu_qbar)
            curves[(name, float(value))] = thin
            rows.extend(
                (name, float(value), ti, yi) for ti, yi in zip(t, thin)
            )

    def draw(fig):
        axes = fig.subplots(1, 2)
        for ax, (name, values) in zip(axes, _SHARED_SWEEPS):
            for value in values:
                ax.plot(t, curves[(name, float(value))], label=f"{name}={value:g}")
            ax.set(xlabel="time", ylabel="loading on crowd inventory")
            ax.legend(fontsize=7)
        fig.suptitle("Crowd-inventory loading under impact sweeps, shared signal")

    return FigureData(4, ("sweep", "value", "t", "nu_qbar"), rows, draw)


def figure5() -> FigureData:
    coeffs = solve_separate(BASE_SEPARATE, _GRID)
    nu_q, nu_qbar, nu_v, nu_vbar = (_thin(x) for x in loadings_separate(coeffs))
    t = _thin(_GRID.t_values)
    header = ("t", "nu_q", "nu_qbar", "nu_V", "nu_Vbar")

    def draw(fig):
        axes = fig.subplots(2, 2)
        for ax, series, label in (
            (axes[0, 0], nu_q, "loading on own inventory"),
            (axes[0, 1], nu_qbar, "loading on crowd inventory"),
            (axes[1, 0], nu_v, "loading on own signal"),
            (axes[1, 1], nu_vbar, "loading on crowd signal"),
        ):
            ax.plot(t, series)
            ax.set(xlabel="time", ylabel=label)
        fig.suptitle("Equilibrium rate loadings, separate signals")

    return FigureData(
        5, header, list(zip(t, nu_q, nu_qbar, nu_v, nu_vbar)), draw
    )


_SEPARATE_SWEEPS = (
    ("b", np.linspace(0.0, 5e-2, 5)),
    ("gamma", np.linspace(0.0, 0.25, 5)),
    ("gamma_bar", np.linspace(0.0, 0.5, 5)),
)


def figure6() -> FigureData:
    t = _thin(_GRID.t_values)
    rows = []
    curves = {}
    for name, values in _SEPARATE_SWEEPS:
        for value in values:
            params = replace(BASE_SEPARATE, **{name: float(value)})
            _, nu_qbar, _, nu_vbar = loadings_separate(solve_separate(params, _GRID))
            pair = (_thin(nu_qbar), _thin(nu_vbar))
            curves[(name, float(value))] = pair
            rows.extend(
                (name, float(value), ti, qi, vi)
                for ti, qi, vi in zip(t, pair[0], pair[1])
            )

    def draw(fig):
        axes = fig.subplots(2, 3)
        for col, (name, values) in enumerate(_SEPARATE_SWEEPS):
            for value in values:
                qb, vb = curves[(name, float(value))]
                axes[0, col].plot(t, qb, label=f"{name}={value:g}")
                axes[1, col].plot(t, vb, label=f"{name}={value:g}")
            axes[0, col].set(xlabel="time", ylabel="loading on crowd inventory")
            axes[1, col].set(xlabel="time", ylabel="loading on crowd signal")
            axes[0, col].legend(fontsize=6)
        fig.suptitle("Crowd loadings under impact sweeps, separate signals")

    return FigureData(6, ("sweep", "value", "t", "nu_qbar", "nu_Vbar"), rows, draw)


def figure7(seed: int = DEFAULT_SEEDS[7]) -> FigureData:
    coeffs = solve_separate(BASE_SEPARATE, _GRID)
    cfg = SimConfig(n_agents=50, n_paths=1, seed=seed)
    market, agents = simulate_separate(BASE_SEPARATE, coeffs, DEMO_INIT, cfg)
    t = agents.times
    n_agents = agents.inventory.shape[2]
    header = (
        "t",
        "agent_id",
        "Q",
        "V",
        "nu",
        "Q_bar",
        "V_bar",
        "nu_bar",
    )
    rows = []
    for n in range(n_agents):
        rows.extend(
            zip(
                t,
                np.full(len(t), n),
                agents.inventory[0, :, n],
                agents.signal[0, :, n],
                agents.rate[0, :, n],
                market.mean_inventory[0],
                market.mean_signal[0],
                market.mean_rate[0],
            )
        )

    def draw(fig):
        axes = fig.subplots(1, 3)
        for ax, block, avg, label in (
            (axes[0], agents.inventory[0], market.mean_inventory[0], "inventory"),
            (axes[1], agents.signal[0], market.mean_signal[0], "signal"),
            (axes[2], agents.rate[0], market.mean_rate[0], "trading rate"),
        ):
            ax.plot(t, block, color="tab:blue", alpha=0.25, linewidth=0.6)
            ax.plot(t, avg, color="tab:red", linestyle="--", linewidth=1.5)
            ax.set(xlabel="time", ylabel=label)
        fig.suptitle("Simulated crowd of 50 agents, separate signals")

    return FigureData(7, header, rows, draw)


_MOMENT_RHOS = (0.0, 0.5, 0.75, 1.0)


def figure8() -> FigureData:
    t = _thin(_GRID.t_values)
    rows = []
    curves = {}
    sigma0 = DEMO_INIT.covariance()
    for rho in _MOMENT_RHOS:
        params = replace(STRONG_IMPACT, rho=rho)
        system = build_moment_system(solve_separate(params, _GRID))
        _, psi = fundamental_pair(system)
        cov = covariance_path(psi, sigma0, params)
        var_q = _thin(cov[:, 0, 0])
        var_v = _thin(cov[:, 1, 1])
        cov_qv = _thin(cov[:, 0, 1])
        denom = np.sqrt(var_q * var_v)
        corr = np.where(denom > 0.0, cov_qv / np.where(denom > 0.0, denom, 1.0), 0.0)
        curves[rho] = (var_q, var_v, corr)
        rows.extend(
            (rho, ti, a, b_, c, r)
            for ti, a, b_, c, r in zip(t, var_q, var_v, cov_qv, corr)
        )

    def draw(fig):
        axes = fig.subplots(1, 3)
        for rho in _MOMENT_RHOS:
            var_q, var_v, corr = curves[rho]
            axes[0].plot(t, var_q, label=f"rho={rho:g}")
            axes[1].plot(t, var_v, label=f"rho={rho:g}")
            axes[2].plot(t, corr, label=f"rho={rho:g}")
        for ax, label in zip(
            axes,
            ("inventory variance", "signal variance", "inventory-signal correlation"),
        ):
            ax.set(xlabel="time", ylabel=label)
            ax.legend(fontsize=7)
        fig.suptitle("Cross-sectional moments in the mean-field limit")

    header = ("rho", "t", "var_Q", "var_V", "cov_QV", "corr_QV")
    return FigureData(8, header, rows, draw)


_VARIANCE_RHOS = (-1.0, -0.5, 0.0, 0.5, 1.0)


def figure9() -> FigureData:
    t = _thin(_GRID.t_values)
    rows = []
    curves = {}
    for rho in _VARIANCE_RHOS:
        params = replace(STRONG_IMPACT, rho=rho)
        system = build_moment_system(solve_separate(params, _GRID))
        phi, _ = fundamental_pair(system)
        var = _thin(price_variance_curve(system, phi, params))
        curves[rho] = var
        rows.extend((rho, ti, vi) for ti, vi in zip(t, var))

    def draw(fig):
        ax = fig.subplots()
        for rho in _VARIANCE_RHOS:
            ax.plot(t, curves[rho], label=f"rho={rho:g}")
        ax.set(xlabel="time", ylabel="mid-price variance")
        ax.legend(fontsize=8)
        fig.suptitle("Mid-price variance in the mean-field limit")

    return FigureData(9, ("rho", "t", "variance"), rows, draw)


_BUILDERS = {
    1: figure1,
    2: figure2,
    3: figure3,
    4: figure4,
    5: figure5,
    6: figure6,
    7: figure7,
    8: figure8,
    9: figure9,
}


def build_figure(fig_id: int, seed: int | None = None) -> FigureData:
    if fig_id not in _BUILDERS:
        raise ValueError(f"figure id must be in 1..9, got {fig_id}")
    builder = _BUILDERS[fig_id]
    if fig_id in DEFAULT_SEEDS:
        return builder(DEFAULT_SEEDS[fig_id] if seed is None else seed)
    return builder()


def render_png(data: FigureData, path) -> None:
    """Draw the figure to a PNG with deterministic bytes."""
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    fig = plt.figure(figsize=(10, 6), dpi=110)
    try:
        data.draw(fig)
        fig.tight_layout(rect=(0, 0, 1, 0.95))
        fig.savefig(path, metadata={"Software": None})
    finally:
        plt.close(fig)
