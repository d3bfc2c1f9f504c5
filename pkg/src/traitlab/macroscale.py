"""The macroscopic layer: the drift field F, its roots, and Y' = F(Y).

F(Y) is the drift of the mean trait for a Gaussian profile of variance
2*sigma2 centred at Y; its stable roots are the limit mean traits of the
population dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_GRID, Grid
from .errors import DivergedError, OutOfRangeError
from .kernels import SelectionFn, eval_selection, gaussian_pdf

ROOT_SCAN_STEP = 0.01
FPRIME_STEP = 1e-5
# values below this magnitude count as zero during the sign scan, so that
# quadrature noise on an identically vanishing field cannot fake crossings
ZERO_FLOOR = 1e-11


@dataclass(frozen=True)
class MacroField:
    """Quadrature context for F: selection, variance and integration grid."""

    sigma2: float
    selection: SelectionFn
    quad_grid: Grid = DEFAULT_GRID

    @property
    def safe_range(self) -> tuple[float, float]:
        margin = 6.0 * np.sqrt(self.sigma2)
        return (self.quad_grid.x_min + margin, self.quad_grid.x_max - margin)


@dataclass(frozen=True)
class RootReport:
    """Roots of F with the central-difference derivative and stability flag."""

    roots: tuple[tuple[float, float, bool], ...]  # (location, F', stable)

    def stable_roots(self) -> list[float]:
        return [z for z, _, s in self.roots if s]

    def unstable_roots(self) -> list[float]:
        return [z for z, _, s in self.roots if not s]


def F_eval(field: MacroField, Y: float) -> float:
    """F(Y) = integral of (x - Y) a(x) Gamma_{2 sigma2}(x - Y) dx."""
    lo, hi = field.safe_range
    if not lo <= Y <= hi:
        raise OutOfRangeError(f"Y={Y} outside quadrature-safe range [{lo:.3f}, {hi:.3f}]")
    x = field.quad_grid.x
    ax = eval_selection(field.selection, x)
    gauss = gaussian_pdf(x - Y, 2.0 * field.sigma2)
    first = field.quad_grid.trapz(x * ax * gauss)
    zeroth = field.quad_grid.trapz(ax * gauss)
    return first - Y * zeroth


def F_prime(field: MacroField, Y: float, step: float = FPRIME_STEP) -> float:
    return (F_eval(field, Y + step) - F_eval(field, Y - step)) / (2.0 * step)


def find_roots(
    field: MacroField,
    search_interval: tuple[float, float],
    root_tol: float = 1e-10,
) -> RootReport:
    """Sign-change scan on a fine lattice followed by bisection refinement.

    F is a Gaussian-smoothed function, so at the scan step no sign change can
    hide between lattice points at the scales of interest.  Lattice points
    where F vanishes to within root_tol are treated as roots directly.
    """
    lo, hi = search_interval
    n_scan = max(int(np.ceil((hi - lo) / ROOT_SCAN_STEP)), 8)
    ys = np.linspace(lo, hi, n_scan + 1)
    fs = np.array([F_eval(field, y) for y in ys])
    signs = np.where(np.abs(fs) <= ZERO_FLOOR, 0, np.sign(fs)).astype(int)

    def refine(a: float, b: float, fa: float) -> float:
        while b - a > root_tol:
            c = 0.5 * (a + b)
            fc = F_eval(field, c)
            if abs(fc) <= ZERO_FLOOR:
                return c
            if (fa < 0.0) != (fc < 0.0):
                b = c
            else:
                a, fa = c, fc
        return 0.5 * (a + b)

    # a root is a transition between opposite nonzero signs, possibly across
    # a run of zero-floor lattice points
    roots: list[float] = []
    prev_idx = None
    for k in range(n_scan + 1):
        if signs[k] == 0:
            continue
        if prev_idx is not None and signs[k] != signs[prev_idx]:
            roots.append(refine(float(ys[prev_idx]), float(ys[k]), float(fs[prev_idx])))
        prev_idx = k

    report = []
    for r in roots:
        fp = F_prime(field, r)
        report.append((r, fp, fp < 0.0))
    return RootReport(tuple(report))


def ode_solve(
    field: MacroField,
    Y0: float,
    t_final: float,
    dt_ode: float = 0.01,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical 4th-order one-step integration of Y' = F(Y).

    Returns (t, Y) arrays; query between nodes by linear interpolation.
    Raises DivergedError if the trajectory leaves the quadrature-safe range.
    """
    lo, hi = field.safe_range
    n_steps = max(int(np.ceil(t_final / dt_ode)), 1)
    dt = t_final / n_steps
    ts = np.linspace(0.0, t_final, n_steps + 1)
    ys = np.empty(n_steps + 1)
    ys[0] = Y0
    y = Y0
    for k in range(n_steps):
        try:
            k1 = F_eval(field, y)
            k2 = F_eval(field, y + 0.5 * dt * k1)
            k3 = F_eval(field, y + 0.5 * dt * k2)
            k4 = F_eval(field, y + dt * k3)
        except OutOfRangeError as exc:
            raise DivergedError(
                f"macroscopic trajectory left safe range at t={ts[k]:.3f}"
            ) from exc
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not lo <= y <= hi:
            raise DivergedError(f"macroscopic trajectory left safe range at t={ts[k + 1]:.3f}")
        ys[k + 1] = y
    return ts, ys


def ode_interp(ts: np.ndarray, ys: np.ndarray, t) -> np.ndarray:
    """Dense output of an ode_solve series by linear interpolation."""
    return np.interp(t, ts, ys)


def compare_macro(record, field: MacroField, alpha: float, dt_ode: float = 0.01) -> float:
    """sup over recorded times of |Z(t) - Y(alpha t)| with Y(0) = Z(0).

    The mean trait moves a factor alpha slower than the macroscopic field,
    so the ODE clock runs at alpha times the simulation clock.
    """
    times = np.asarray(record.times)
    z = np.asarray(record.Z)
    tau_final = alpha * float(times[-1])
    if tau_final <= 0.0:
        return 0.0
    ts, ys = ode_solve(field, float(z[0]), tau_final, dt_ode)
    y_at = ode_interp(ts, ys, alpha * times)
    return float(np.max(np.abs(z - y_at)))
