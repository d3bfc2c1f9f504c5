"""Gaussian kernels and selection functions.

A selection function is a sum of Gaussian bumps, optionally cut off smoothly
at a truncation radius (so it is compactly supported while staying C^2), or a
sampled table interpolated linearly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Grid
from .errors import NonPositiveVarianceError


def gaussian_pdf(x, variance: float):
    """Normal density with mean 0: exp(-x^2 / (2 v)) / sqrt(2 pi v)."""
    if variance <= 0.0:
        raise NonPositiveVarianceError(f"variance must be > 0, got {variance}")
    x = np.asarray(x, dtype=float)
    out = np.exp(-(x**2) / (2.0 * variance)) / np.sqrt(2.0 * np.pi * variance)
    return out if out.ndim else float(out)


def _smooth_window(r: np.ndarray, radius: float):
    """C^2 cutoff: 1 for r <= radius-1, 0 for r >= radius, quintic in between."""
    s = np.clip(r - (radius - 1.0), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _smooth_window_d1(r: np.ndarray, radius: float):
    s = np.clip(r - (radius - 1.0), 0.0, 1.0)
    return -30.0 * s**2 * (1.0 - s) ** 2


def _smooth_window_d2(r: np.ndarray, radius: float):
    s = np.clip(r - (radius - 1.0), 0.0, 1.0)
    return -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


@dataclass(frozen=True)
class SelectionFn:
    """Nonnegative selection a(x).

    bumps: (amplitude, center, width) triples, a(x) = sum A exp(-(x-c)^2/w^2).
    truncation_radius: if set, a is multiplied by a C^2 window vanishing for
        |x| >= radius (the window ramps over [radius-1, radius]).
    table: optional (xs, ys) sampled override, interpolated linearly and zero
        outside the sampled span; when present the bumps are ignored.
    """

    bumps: tuple[tuple[float, float, float], ...] = ()
    truncation_radius: float | None = None
    table: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        bumps = tuple((float(a), float(c), float(w)) for a, c, w in self.bumps)
        object.__setattr__(self, "bumps", bumps)
        for a, _, w in bumps:
            if a < 0.0:
                raise ValueError(f"bump amplitude must be >= 0, got {a}")
            if w <= 0.0:
                raise ValueError(f"bump width must be > 0, got {w}")
        if self.truncation_radius is not None and self.truncation_radius <= 1.0:
            raise ValueError("truncation_radius must exceed the 1-unit cutoff ramp")
        if self.table is not None:
            xs = np.asarray(self.table[0], dtype=float)
            ys = np.asarray(self.table[1], dtype=float)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
                raise ValueError("table must be two equal-length 1-D columns")
            if np.any(np.diff(xs) <= 0.0):
                raise ValueError("table x column must be strictly increasing")
            if np.any(ys < 0.0):
                raise ValueError("selection values must be >= 0")
            xs.flags.writeable = False
            ys.flags.writeable = False
            object.__setattr__(self, "table", (xs, ys))

    def _raw(self, x: np.ndarray) -> np.ndarray:
        if self.table is not None:
            xs, ys = self.table
            return np.interp(x, xs, ys, left=0.0, right=0.0)
        out = np.zeros_like(x)
        for a, c, w in self.bumps:
            out += a * np.exp(-((x - c) ** 2) / w**2)
        return out

    def _raw_d1(self, x: np.ndarray) -> np.ndarray:
        if self.table is not None:
            xs, ys = self.table
            return np.interp(x, xs, np.gradient(ys, xs), left=0.0, right=0.0)
        out = np.zeros_like(x)
        for a, c, w in self.bumps:
            out += a * (-2.0 * (x - c) / w**2) * np.exp(-((x - c) ** 2) / w**2)
        return out

    def _raw_d2(self, x: np.ndarray) -> np.ndarray:
        if self.table is not None:
            xs, ys = self.table
            d1 = np.gradient(ys, xs)
            return np.interp(x, xs, np.gradient(d1, xs), left=0.0, right=0.0)
        out = np.zeros_like(x)
        for a, c, w in self.bumps:
            u = (x - c) / w
            out += a * (4.0 * u**2 - 2.0) / w**2 * np.exp(-(u**2))
        return out

    def support_radius(self) -> float:
        """Radius beyond which a vanishes (or is negligible when untruncated)."""
        if self.truncation_radius is not None:
            return float(self.truncation_radius)
        if self.table is not None:
            xs, _ = self.table
            return float(max(abs(xs[0]), abs(xs[-1])))
        if not self.bumps:
            return 0.0
        # untruncated Gaussian bumps: effective support at 8 widths
        return max(abs(c) + 8.0 * w for _, c, w in self.bumps)

    def sup_value(self, n_samples: int = 4096) -> float:
        r = max(self.support_radius(), 1.0)
        x = np.linspace(-r, r, n_samples)
        return float(eval_selection(self, x).max(initial=0.0))


def eval_selection(a: SelectionFn, x):
    """Value of a at x (0 beyond the truncation radius)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = a._raw(xs)
    if a.truncation_radius is not None:
        out = out * _smooth_window(np.abs(xs), a.truncation_radius)
    return out if np.ndim(x) else float(out[0])


def eval_selection_d1(a: SelectionFn, x):
    """First derivative of a at x."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if a.truncation_radius is None:
        out = a._raw_d1(xs)
    else:
        r = np.abs(xs)
        sgn = np.sign(xs)
        w0 = _smooth_window(r, a.truncation_radius)
        w1 = _smooth_window_d1(r, a.truncation_radius) * sgn
        out = a._raw_d1(xs) * w0 + a._raw(xs) * w1
    return out if np.ndim(x) else float(out[0])


def eval_selection_d2(a: SelectionFn, x):
    """Second derivative of a at x."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if a.truncation_radius is None:
        out = a._raw_d2(xs)
    else:
        r = np.abs(xs)
        sgn = np.sign(xs)
        w0 = _smooth_window(r, a.truncation_radius)
        w1 = _smooth_window_d1(r, a.truncation_radius)
        w2 = _smooth_window_d2(r, a.truncation_radius)
        out = a._raw_d2(xs) * w0 + 2.0 * a._raw_d1(xs) * w1 * sgn + a._raw(xs) * w2
    return out if np.ndim(x) else float(out[0])


def selection_sup_norms(a: SelectionFn, grid: Grid) -> tuple[float, float, float]:
    """Sampled suprema of |a|, |a'|, |a''| over the grid nodes.

    Bump centers and table nodes are appended to the sample set so the peak
    value is exact even when it falls between grid nodes.
    """
    x = grid.x
    extra = [c for _, c, _ in a.bumps]
    if a.table is not None:
        extra.extend(a.table[0])
    if extra:
        x = np.concatenate([x, np.asarray(extra, dtype=float)])
    return (
        float(np.max(np.abs(eval_selection(a, x)), initial=0.0)),
        float(np.max(np.abs(eval_selection_d1(a, x)), initial=0.0)),
        float(np.max(np.abs(eval_selection_d2(a, x)), initial=0.0)),
    )


def bimodal_benchmark_selection(truncated: bool = True, radius: float = 12.0) -> SelectionFn:
    """The double-bump benchmark selection 2 e^{-(x-5)^2/4} + e^{-(x+5)^2/4}.

    The truncated variant multiplies in the C^2 cutoff so the function is
    compactly supported; the bump tails at the default radius are below 1e-5,
    leaving the two-attractor structure unchanged.
    """
    return SelectionFn(
        bumps=((2.0, 5.0, 2.0), (1.0, -5.0, 2.0)),
        truncation_radius=radius if truncated else None,
    )


def affine_ramp_selection(slope: float = 0.5, span: float = 4.0) -> SelectionFn:
    """Sampled table for a(x) = max(0, 1 + slope*x) on [-span, span].

    Linear interpolation reproduces the affine part exactly, which the atomic
    counterexample fixtures rely on.
    """
    x_kink = -1.0 / slope
    xs = np.array([-span, x_kink, span])
    ys = np.array([0.0, 0.0, 1.0 + slope * span])
    return SelectionFn(table=(xs, ys))
