"""Numerical kernels shared by every solver module.

Fixed-step classical RK4 for terminal-value ODE systems (integrated on the
time-reversed axis), fundamental-matrix solutions M' = A(t) M, M(0) = I of
linear time-varying 2x2 systems with per-node adjugate inverses, composite
Simpson quadrature, and uniform-grid interpolation helpers.  Everything here
is deterministic and allocation-explicit so repeated runs are bit-identical;
no adaptive step control is used anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import TimeGrid

__all__ = [
    "VectorField",
    "MatrixPath",
    "BlowupError",
    "SingularFundamentalError",
    "integrate_backward",
    "fundamental_matrix",
    "quadrature",
    "cumulative_integral",
    "integrate_nodes",
    "cubic_interpolant",
    "sample_linear",
]

BLOWUP_THRESHOLD = 1e12
SINGULAR_DET_TOL = 1e-12


class BlowupError(RuntimeError):
    """State left the finite range during integration."""


class SingularFundamentalError(RuntimeError):
    """A fundamental matrix became numerically singular."""


@dataclass(frozen=True)
class VectorField:
    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MatrixPath:
    """2x2 fundamental matrix sampled on a grid, with per-node inverses."""

    grid: TimeGrid
    values: np.ndarray        # (n+1, 2, 2)
    inverses: np.ndarray      # (n+1, 2, 2)
    determinants: np.ndarray  # (n+1,)


def _rk4_march(rhs, y0, times, blowup):
    """Classical RK4 along `times` (order as given; steps may be negative)."""
    y = np.array(y0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for i in range(len(times) - 1):
        t0 = times[i]
        t1 = times[i + 1]
        h = t1 - t0
        k1 = rhs(t0, y)
        k2 = rhs(t0 + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(t0 + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rhs(t1, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > blowup:
            raise BlowupError(f"integration blew up at t={t1:.12g}")
        out[i + 1] = y
    return out


def integrate_backward(
    field: VectorField,
    terminal_value,
    grid: TimeGrid,
    blowup: float = BLOWUP_THRESHOLD,
) -> np.ndarray:
    """Solve y' = rhs(t, y), y(T) = terminal_value, backward to t = 0.

    Returns the path indexed on the original (increasing) grid, shape
    (n_steps+1, dimension); the last row equals terminal_value exactly.
    Raises BlowupError naming the first bad time if any component leaves
    the finite range or exceeds `blowup` in magnitude.
    """
    terminal = np.asarray(terminal_value, dtype=float)
    if terminal.shape != (field.dimension,):
        raise ValueError(
            f"terminal value has shape {terminal.shape}, "
            f"expected ({field.dimension},)"
        )
    reversed_path = _rk4_march(field.rhs, terminal, grid.t_values[::-1], blowup)
    return reversed_path[::-1].copy()


def fundamental_matrix(
    coeff: Callable[[float], np.ndarray],
    grid: TimeGrid,
    singular_tol: float = SINGULAR_DET_TOL,
) -> MatrixPath:
    """Solve M'(t) = coeff(t) M(t), M(0) = I, forward on the grid.

    values[0] is the identity exactly.  Inverses are computed per node by the
    2x2 adjugate formula; a determinant below `singular_tol` in magnitude
    raises SingularFundamentalError.
    """

    def rhs(t, m):
        return np.asarray(coeff(t), dtype=float) @ m

    values = _rk4_march(rhs, np.eye(2), grid.t_values, BLOWUP_THRESHOLD)
    dets = (
        values[:, 0, 0] * values[:, 1, 1] - values[:, 0, 1] * values[:, 1, 0]
    )
    bad = np.abs(dets) < singular_tol
    if np.any(bad):
        t_bad = grid.t_values[np.argmax(bad)]
        raise SingularFundamentalError(
            f"fundamental matrix singular at t={t_bad:.12g} "
            f"(|det| < {singular_tol:g})"
        )
    inverses = np.empty_like(values)
    inverses[:, 0, 0] = values[:, 1, 1] / dets
    inverses[:, 0, 1] = -values[:, 0, 1] / dets
    inverses[:, 1, 0] = -values[:, 1, 0] / dets
    inverses[:, 1, 1] = values[:, 0, 0] / dets
    return MatrixPath(grid=grid, values=values, inverses=inverses, determinants=dets)


def quadrature(integrand, a: float, b: float, grid: TimeGrid) -> float:
    """Composite Simpson integral of `integrand` over [a, b].

    Panels are the grid intervals restricted to [a, b] (partial end panels
    included); each panel uses the endpoint/midpoint Simpson rule, which is
    exact for cubics regardless of panel count or width.  `integrand` must
    accept numpy arrays.
    """
    tol = 1e-12 * max(1.0, grid.horizon_T)
    if b < a:
        raise ValueError("quadrature requires a <= b")
    if a < -tol or b > grid.horizon_T + tol:
        raise ValueError("quadrature limits must lie within [0, horizon_T]")
    if b == a:
        return 0.0
    t = grid.t_values
    interior = t[(t > a) & (t < b)]
    pts = np.concatenate(([a], interior, [b]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    widths = np.diff(pts)

    def _eval(x):
        return np.broadcast_to(np.asarray(integrand(x), dtype=float), x.shape)

    f_pts = _eval(pts)
    f_mids = _eval(mids)
    return float(
        np.sum(widths / 6.0 * (f_pts[:-1] + 4.0 * f_mids + f_pts[1:]))
    )


def cumulative_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral of node-sampled data on a uniform grid, O(h^4).

    `values` has shape (n+1, ...) with n >= 3; returns the running integral
    F with F[0] = 0 and F[i] = integral over [t_0, t_i].  Each interval uses
    the 4-point Newton-Cotes rule on the cubic through the nearest stencil,
    so the result is exact for cubic integrands.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0] - 1
    if n < 3:
        raise ValueError("cumulative_integral needs at least 4 nodes")
    inc = np.empty_like(f[:-1])
    inc[0] = (dt / 24.0) * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    inc[1 : n - 1] = (dt / 24.0) * (
        -f[: n - 2] + 13.0 * f[1 : n - 1] + 13.0 * f[2:n] - f[3 : n + 1]
    )
    inc[n - 1] = (dt / 24.0) * (
        f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n]
    )
    out = np.zeros_like(f)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def integrate_nodes(values: np.ndarray, dt: float) -> float:
    """Integral of node-sampled data over its whole span, O(h^4).

    Composite Simpson when the interval count is even; odd counts >= 3 use
    Simpson on the leading even block plus the 3/8 rule on the final three
    intervals.  A single interval falls back to the trapezoid rule.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0] - 1
    if n == 0:
        return 0.0
    if n == 1:
        return float(0.5 * dt * (f[0] + f[1]))
    if n % 2 == 1:
        head = integrate_nodes(f[: n - 2], dt) if n > 3 else 0.0
        tail = (3.0 * dt / 8.0) * (
            f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]
        )
        return float(head + tail)
    return float(
        (dt / 3.0)
        * (f[0] + f[n] + 4.0 * np.sum(f[1:n:2]) + 2.0 * np.sum(f[2 : n - 1 : 2]))
    )


def cubic_interpolant(times: np.ndarray, values: np.ndarray):
    """4-point Lagrange interpolant of uniform-grid samples; exact for cubics.

    Returns a callable mapping scalar or array t to interpolated values of
    shape t.shape + values.shape[1:].  Queries are clamped to the grid span.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(times) - 1
    if n < 3:
        raise ValueError("cubic interpolation needs at least 4 nodes")
    t0 = times[0]
    h = (times[-1] - t0) / n
    trailing = (1,) * (values.ndim - 1)

    def evaluate(t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        tq = np.atleast_1d(t_arr)
        j = np.clip(np.floor((tq - t0) / h).astype(int), 0, n - 1)
        m = np.clip(j - 1, 0, n - 3)
        s = (tq - times[m]) / h
        w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0
        w1 = s * (s - 2.0) * (s - 3.0) / 2.0
        w2 = -s * (s - 1.0) * (s - 3.0) / 2.0
        w3 = s * (s - 1.0) * (s - 2.0) / 6.0
        out = (
            w0.reshape(w0.shape + trailing) * values[m]
            + w1.reshape(w1.shape + trailing) * values[m + 1]
            + w2.reshape(w2.shape + trailing) * values[m + 2]
            + w3.reshape(w3.shape + trailing) * values[m + 3]
        )
        return out[0] if scalar else out

    return evaluate


def sample_linear(times: np.ndarray, values: np.ndarray, t):
    """Linear interpolation of grid samples at time(s) t, exact at the nodes.

    Raises ValueError when t lies outside the grid span (domain error).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(times) - 1
    t0 = times[0]
    tn = times[-1]
    h = (tn - t0) / n
    t_arr = np.asarray(t, dtype=float)
    tol = 1e-12 * max(1.0, abs(tn))
    if np.any(t_arr < t0 - tol) or np.any(t_arr > tn + tol):
        raise ValueError(f"time {t} outside [{t0:g}, {tn:g}]")
    scalar = t_arr.ndim == 0
    tq = np.atleast_1d(np.clip(t_arr, t0, tn))
    j = np.clip(np.floor((tq - t0) / h).astype(int), 0, n - 1)
    w = (tq - times[j]) / (times[j + 1] - times[j])
    trailing = (1,) * (values.ndim - 1)
    w = w.reshape(w.shape + trailing)
    out = (1.0 - w) * values[j] + w * values[j + 1]
    return out[0] if scalar else out
