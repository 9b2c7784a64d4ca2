"""Command-line driver.

Subcommands solve the three models, run simulations, evaluate population
moments and mid-price variance, and reproduce the bundled figures as CSV
data plus rendered PNGs.  Error handling maps to exit codes: 2 for
unreadable or malformed configs and arguments, 3 for scenarios that parse
but violate a constraint, 4 for a coefficient-system blowup.

The output directory resolves in order: -o flag, CROWDTRADE_OUTDIR
environment variable, the scenario's `outputs` entry, current directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, Scenario, ValidationError, load_scenario
from .cross_section import (
    build_moment_system,
    closed_form_covariance,
    covariance_path,
    fundamental_pair,
    mean_path,
    price_variance_curve,
)
from .figures import build_figure, render_png
from .mfg_separate import loadings_separate, solve_separate
from .mfg_shared import loadings_shared, solve_shared
from .model import validate
from .ode import BlowupError
from .output import columns_table, write_csv_table
from .simulator import (
    empirical_cross_moments,
    objective_sample,
    simulate_separate,
    simulate_shared,
    simulate_single,
)
from .single_agent import rate_coefficients, solve_single

ENV_OUTDIR = "CROWDTRADE_OUTDIR"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdtrade",
        description="Optimal-trading solvers and simulations with mean-reverting signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scenario_cmds = {
        "solve-single": "solve the one-agent coefficient system",
        "solve-shared": "solve the shared-signal equilibrium system",
        "solve-separate": "solve the separate-signals equilibrium system",
        "simulate": "run the finite-population simulation for the scenario mode",
        "moments": "evaluate analytic cross-sectional moments (separate mode)",
        "price-variance": "evaluate mid-price variance curves per correlation",
    }
    parsers = {}
    for name, help_text in scenario_cmds.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", required=True, help="scenario TOML file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path override applied after the file parses",
        )
        p.add_argument("-o", "--outdir", help="output directory")
        parsers[name] = p
    parsers["simulate"].add_argument(
        "-s", "--seed", type=int, help="override the scenario seed"
    )
    parsers["price-variance"].add_argument(
        "--rho",
        default="-1,-0.5,0,0.5,1",
        help="comma-separated signal correlations to evaluate",
    )

    fig = sub.add_parser("figure", help="emit the data behind one bundled figure")
    fig.add_argument(
        "fig_id", type=int, metavar="id", choices=range(1, 10), help="figure id, 1-9"
    )
    fig.add_argument("-o", "--outdir", help="output directory")
    fig.add_argument("-s", "--seed", type=int, help="seed for simulation figures")
    fig.add_argument(
        "--no-plots", action="store_true", help="write CSV data only, skip PNGs"
    )
    return parser


def _resolve_outdir(args, scenario: Scenario | None) -> Path:
    if getattr(args, "outdir", None):
        return Path(args.outdir)
    env = os.environ.get(ENV_OUTDIR)
    if env:
        return Path(env)
    if scenario is not None:
        return scenario.outputs
    return Path(".")


def _coefficient_columns(times, coeffs, f=None):
    cols = [times]
    header = ["t"]
    for j in range(coeffs.shape[1]):
        header.append(f"c{j + 1}")
        cols.append(coeffs[:, j])
    if f is not None:
        for j in range(f.shape[1]):
            header.append(f"f{j + 1}")
            cols.append(f[:, j])
    return header, cols


def _cmd_solve_single(scenario: Scenario, outdir: Path) -> list[Path]:
    coeffs = solve_single(scenario.params, scenario.grid)
    header, cols = _coefficient_columns(scenario.grid.t_values, coeffs.coeffs)
    intercept, nu_q, nu_v = rate_coefficients(coeffs)
    header += ["rate_intercept", "nu_q", "nu_V"]
    cols += [intercept, nu_q, nu_v]
    return [columns_table(outdir / "coeffs_single.csv", header, cols)]


def _cmd_solve_shared(scenario: Scenario, outdir: Path) -> list[Path]:
    coeffs = solve_shared(scenario.params, scenario.grid)
    header, cols = _coefficient_columns(
        scenario.grid.t_values, coeffs.coeffs, coeffs.f
    )
    nu_q, nu_qbar, nu_vbar = loadings_shared(coeffs)
    header += ["nu_q", "nu_qbar", "nu_Vbar"]
    cols += [nu_q, nu_qbar, nu_vbar]
    return [columns_table(outdir / "coeffs_shared.csv", header, cols)]


def _cmd_solve_separate(scenario: Scenario, outdir: Path) -> list[Path]:
    coeffs = solve_separate(scenario.params, scenario.grid)
    header, cols = _coefficient_columns(
        scenario.grid.t_values, coeffs.coeffs, coeffs.f
    )
    nu_q, nu_qbar, nu_v, nu_vbar = loadings_separate(coeffs)
    header += ["nu_q", "nu_qbar", "nu_V", "nu_Vbar"]
    cols += [nu_q, nu_qbar, nu_v, nu_vbar]
    return [columns_table(outdir / "coeffs_separate.csv", header, cols)]


def _summary_rows(agents, market, params):
    objective = objective_sample(agents, market, params)
    n_paths, _, n_agents = agents.inventory.shape
    t0 = agents.times[0]
    t_end = agents.times[-1]
    if n_agents >= 2:
        mean0, cov0 = empirical_cross_moments(agents, t0)
        mean_t, cov_t = empirical_cross_moments(agents, t_end)
    else:
        mean0 = np.stack(
            [agents.inventory[:, 0, 0], agents.signal[:, 0, 0]], axis=1
        )
        mean_t = np.stack(
            [agents.inventory[:, -1, 0], agents.signal[:, -1, 0]], axis=1
        )
        cov0 = cov_t = np.full((n_paths, 2, 2), np.nan)
    rows = []
    for p in range(n_paths):
        rows.append(
            (
                p,
                mean0[p, 0],
                mean0[p, 1],
                cov0[p, 0, 0],
                cov0[p, 1, 1],
                cov0[p, 0, 1],
                mean_t[p, 0],
                mean_t[p, 1],
                cov_t[p, 0, 0],
                cov_t[p, 1, 1],
                cov_t[p, 0, 1],
                objective[p].mean(),
            )
        )
    return rows


_SUMMARY_HEADER = (
    "path_id",
    "mean_Q_start",
    "mean_V_start",
    "var_Q_start",
    "var_V_start",
    "cov_QV_start",
    "mean_Q_end",
    "mean_V_end",
    "var_Q_end",
    "var_V_end",
    "cov_QV_end",
    "mean_objective",
)


def _cmd_simulate(scenario: Scenario, outdir: Path, seed: int | None) -> list[Path]:
    sim = scenario.sim if seed is None else replace(scenario.sim, seed=seed)
    params, init, grid = scenario.params, scenario.initial, scenario.grid
    if scenario.mode == "single":
        coeffs = solve_single(params, grid)
        market, agents = simulate_single(params, coeffs, init, sim)
    elif scenario.mode == "shared":
        coeffs = solve_shared(params, grid)
        market, agents = simulate_shared(params, coeffs, init, sim)
    else:
        coeffs = solve_separate(params, grid)
        market, agents = simulate_separate(params, coeffs, init, sim)

    t = agents.times
    n_paths, _, n_agents = agents.inventory.shape
    agent_rows = []
    for p in range(n_paths):
        for n in range(n_agents):
            agent_rows.extend(
                zip(
                    np.full(len(t), p),
                    np.full(len(t), n),
                    t,
                    agents.inventory[p, :, n],
                    agents.signal[p, :, n],
                    agents.cash[p, :, n],
                    agents.rate[p, :, n],
                )
            )
    market_rows = []
    for p in range(n_paths):
        market_rows.extend(
            zip(
                np.full(len(t), p),
                t,
                market.price[p],
                market.mean_inventory[p],
                market.mean_signal[p],
                market.mean_rate[p],
            )
        )
    return [
        write_csv_table(
            outdir / "sim_agents.csv",
            ("path_id", "agent_id", "t", "Q", "V", "X", "nu"),
            agent_rows,
        ),
        write_csv_table(
            outdir / "sim_market.csv",
            ("path_id", "t", "S", "Q_bar", "V_bar", "nu_bar"),
            market_rows,
        ),
        write_csv_table(
            outdir / "sim_summary.csv",
            _SUMMARY_HEADER,
            _summary_rows(agents, market, params),
        ),
    ]


def _cmd_moments(scenario: Scenario, outdir: Path) -> list[Path]:
    if scenario.mode != "separate":
        raise ValidationError(["moments require mode = separate"])
    params, init, grid = scenario.params, scenario.initial, scenario.grid
    coeffs = solve_separate(params, grid)
    system = build_moment_system(coeffs)
    phi, psi = fundamental_pair(system)
    zero_noise = np.zeros(grid.n_steps)
    mean = mean_path(
        system, phi, zero_noise, np.array([init.mean_Q0, init.mean_V0])
    )
    cov = covariance_path(psi, init.covariance(), params)
    var_q, var_v, cov_qv = cov[:, 0, 0], cov[:, 1, 1], cov[:, 0, 1]
    denom = np.sqrt(var_q * var_v)
    corr = np.where(denom > 0.0, cov_qv / np.where(denom > 0.0, denom, 1.0), 0.0)
    header = ["t", "mean_Q", "mean_V", "var_Q", "var_V", "cov_QV", "corr_QV"]
    cols = [grid.t_values, mean[:, 0], mean[:, 1], var_q, var_v, cov_qv, corr]
    try:
        closed = closed_form_covariance(params, init.covariance(), grid.t_values)
        header += ["closed_var_Q", "closed_var_V", "closed_cov_QV"]
        cols += [closed[:, 0, 0], closed[:, 1, 1], closed[:, 0, 1]]
    except ValueError:
        pass  # closed forms need the zero-parameter conditions
    return [columns_table(outdir / "moments.csv", header, cols)]


def _cmd_price_variance(scenario: Scenario, outdir: Path, rho_text: str) -> list[Path]:
    if scenario.mode != "separate":
        raise ValidationError(["price-variance requires mode = separate"])
    try:
        rhos = [float(tok) for tok in rho_text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --rho list {rho_text!r}") from exc
    if not rhos:
        raise ConfigError("--rho list is empty")
    grid = scenario.grid
    rows = []
    for rho in rhos:
        params = replace(scenario.params, rho=rho)
        problems = validate(params)
        if problems:
            raise ValidationError(problems)
        system = build_moment_system(solve_separate(params, grid))
        phi, _ = fundamental_pair(system)
        var = price_variance_curve(system, phi, params)
        rows.extend((rho, t, v) for t, v in zip(grid.t_values, var))
    return [
        write_csv_table(outdir / "price_variance.csv", ("rho", "t", "variance"), rows)
    ]


def _cmd_figure(args) -> list[Path]:
    outdir = _resolve_outdir(args, None)
    data = build_figure(args.fig_id, args.seed)
    paths = [
        write_csv_table(outdir / f"figure{args.fig_id}.csv", data.header, data.rows)
    ]
    if not args.no_plots:
        png = outdir / f"figure{args.fig_id}.png"
        png.parent.mkdir(parents=True, exist_ok=True)
        render_png(data, png)
        paths.append(png)
    return paths


def _dispatch(args) -> list[Path]:
    if args.command == "figure":
        return _cmd_figure(args)
    scenario = load_scenario(args.config, args.overrides)
    outdir = _resolve_outdir(args, scenario)
    if args.command == "solve-single":
        return _cmd_solve_single(scenario, outdir)
    if args.command == "solve-shared":
        return _cmd_solve_shared(scenario, outdir)
    if args.command == "solve-separate":
        return _cmd_solve_separate(scenario, outdir)
    if args.command == "simulate":
        return _cmd_simulate(scenario, outdir, args.seed)
    if args.command == "moments":
        return _cmd_moments(scenario, outdir)
    if args.command == "price-variance":
        return _cmd_price_variance(scenario, outdir, args.rho)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        written = _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        for message in exc.messages:
            print(f"error: {message}", file=sys.stderr)
        return 3
    except BlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
