"""Grids, discrete densities, atomic measures, moments and normalization.

Everything downstream (transport, reproduction, dynamics) consumes the types
defined here.  All integrals are trapezoidal on the uniform trait lattice;
densities are treated as identically zero outside the grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroError

# Values in [-NEG_CLAMP, 0) are floating-point noise and get clamped to 0;
# anything more negative is a scheme instability and raises.
NEG_CLAMP = 1e-14

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D trait lattice with n_points nodes on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n_points < 16:
            raise ValueError(f"grid needs n_points >= 16, got {self.n_points}")
        if self.n_points & (self.n_points - 1):
            raise ValueError(f"n_points must be a power of two, got {self.n_points}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_points)

    def trapz(self, values: np.ndarray) -> float:
        v = np.asarray(values, dtype=float)
        return float(self.h * (v.sum() - 0.5 * (v[0] + v[-1])))


DEFAULT_GRID = Grid(-20.0, 20.0, 1024)


@dataclass(frozen=True)
class Density:
    """Probability density sampled on a grid; unit trapezoidal mass.

    Construct through :func:`normalize` (or the helpers below) so the mass
    contract holds.  The value array is adopted and frozen, making instances
    immutable and safe to share across threads.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "values", v)
        v.flags.writeable = False

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


def normalize(grid: Grid, values: np.ndarray) -> Density:
    """Clamp float-noise negatives, rescale to unit mass, return a Density.

    Raises AllZeroError when the mass is not positive or when any value is
    negative beyond the noise clamp (that would hide a scheme instability).
    """
    v = np.asarray(values, dtype=float).copy()
    worst = v.min(initial=0.0)
    if worst < -NEG_CLAMP:
        raise AllZeroError(f"negative density value {worst:.3e} exceeds clamp {-NEG_CLAMP:.0e}")
    np.clip(v, 0.0, None, out=v)
    m = grid.trapz(v)
    if m <= 0.0:
        raise AllZeroError("cannot normalize: total mass is zero")
    v /= m
    return Density(grid, v)


def mass(n: Density) -> float:
    """Trapezoidal integral of the density (1 by construction)."""
    return n.grid.trapz(n.values)


def mean(n: Density) -> float:
    """Mean trait: trapezoidal integral of x * n(x)."""
    return n.grid.trapz(n.grid.x * n.values)


def second_moment(n: Density) -> float:
    """Trapezoidal integral of x^2 * n(x)."""
    return n.grid.trapz(n.grid.x**2 * n.values)


def variance(n: Density) -> float:
    return second_moment(n) - mean(n) ** 2


def boundary_mass(n: Density) -> float:
    """Trapezoidal mass of the first and last grid cells."""
    v, h = n.values, n.grid.h
    return 0.5 * h * float(v[0] + v[1] + v[-2] + v[-1])


def gaussian_density(grid: Grid, center: float, var: float) -> Density:
    """Normal density with given center and variance, sampled and normalized."""
    if var <= 0.0:
        raise ValueError(f"variance must be positive, got {var}")
    x = grid.x
    return normalize(grid, np.exp(-((x - center) ** 2) / (2.0 * var)))


def mixture_density(grid: Grid, components: list[tuple[float, float, float]]) -> Density:
    """Mixture of Gaussians given as (weight, center, variance) triples."""
    out = np.zeros(grid.n_points)
    for w, c, v in components:
        if w <= 0.0:
            raise ValueError(f"mixture weight must be positive, got {w}")
        if v <= 0.0:
            raise ValueError(f"mixture variance must be positive, got {v}")
        out += w * np.exp(-((grid.x - c) ** 2) / (2.0 * v)) / np.sqrt(2.0 * np.pi * v)
    return normalize(grid, out)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite mixture of point masses and uniform segments, total weight 1.

    atoms: list of (location, weight); locations strictly increasing.
    segments: list of (left, right, weight) uniform pieces with left < right.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    segments: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        segments = tuple((float(l), float(r), float(w)) for l, r, w in self.segments)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "segments", segments)
        locs = [x for x, _ in atoms]
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("atom locations must be strictly increasing")
        if any(w <= 0.0 for _, w in atoms):
            raise ValueError("atom weights must be positive")
        for l, r, w in segments:
            if not l < r:
                raise ValueError(f"segment needs left < right, got [{l}, {r}]")
            if w <= 0.0:
                raise ValueError(f"segment weight must be positive, got {w}")
        total = self.total_weight()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total weight must be 1, got {total!r}")

    def total_weight(self) -> float:
        return float(sum(w for _, w in self.atoms) + sum(w for _, _, w in self.segments))

    def mean(self) -> float:
        m = sum(x * w for x, w in self.atoms)
        m += sum(0.5 * (l + r) * w for l, r, w in self.segments)
        return float(m)

    def second_moment(self) -> float:
        s = sum(x * x * w for x, w in self.atoms)
        s += sum(w * (l * l + l * r + r * r) / 3.0 for l, r, w in self.segments)
        return float(s)


@dataclass(frozen=True)
class ModelParams:
    """Model and scheme parameters for the population dynamics.

    alpha: selection strength (>= 0; zero gives the pure-reproduction flow).
    sigma2: segregational variance of the mixing kernel.
    selection: callable-style selection configuration (see kernels module).
    dt: Euler time step; must satisfy dt * (1 + alpha * sup a)^2 < 1 so the
        update stays a convex combination (positivity of the scheme).
    t_final: integration horizon.
    """

    alpha: float
    sigma2: float
    selection: "object"
    dt: float
    t_final: float

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final <= 0.0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        sup_a = float(self.selection.sup_value()) if self.selection is not None else 0.0
        birth_rate = (1.0 + self.alpha * sup_a) ** 2
        if self.dt * birth_rate >= 1.0:
            raise ValueError(
                f"dt={self.dt} violates the positivity bound: "
                f"dt*(1+alpha*sup a)^2 = {self.dt * birth_rate:.4f} >= 1"
            )


def density_to_csv(n: Density, path) -> None:
    """Write a density as two-column CSV with header x,density."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density"])
        for xi, vi in zip(n.grid.x, n.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def density_from_csv(path, grid: Grid | None = None) -> Density:
    """Read an (x, density) CSV; resample onto `grid` if given.

    Without a target grid the x column must itself be a valid uniform
    power-of-two lattice.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [c.strip().lower() for c in header[:2]] != ["x", "density"]:
            raise ValueError(f"expected header 'x,density' in {path}, got {header}")
        for row in r:
            if not row:
                continue
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    xs_arr = np.asarray(xs)
    vs_arr = np.asarray(vs)
    if grid is None:
        n_pts = len(xs_arr)
        grid = Grid(float(xs_arr[0]), float(xs_arr[-1]), n_pts)
        step = np.diff(xs_arr)
        if not np.allclose(step, grid.h, rtol=1e-9, atol=1e-12):
            raise ValueError(f"x column of {path} is not a uniform lattice")
        return normalize(grid, vs_arr)
    resampled = np.interp(grid.x, xs_arr, vs_arr, left=0.0, right=0.0)
    return normalize(grid, resampled)
