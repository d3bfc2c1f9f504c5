"""Quantile representations and 1-D optimal-transport distances.

In one dimension the optimal coupling is the quantile coupling, so W2 and W1
reduce to L^p distances between pseudo-inverse CDFs and no transport solver
is needed.  Grid densities are inverted by monotone linear interpolation of
the trapezoidal CDF on a shared midpoint probability lattice; atomic measures
carry an exact piecewise quantile representation so that flat runs and jumps
(the currency of the counterexample fixtures) are resolved exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AtomicMeasure, Density, mean as density_mean, normalize
from .errors import GridMismatchError, ZeroSelectionMassError
from .kernels import SelectionFn, eval_selection

DEFAULT_K = 4096

# Sub-cells used when a tilt reweights a uniform segment: the reweighted
# density is no longer uniform, so each segment is split into sub-segments
# whose masses are computed by the trapezoid rule (exact for affine
# selections, which is all the exact fixtures need).
_TILT_SUBDIV = 1024


@dataclass(frozen=True)
class QuantileFn:
    """Quantile function sampled on the midpoint lattice z_k = (k+1/2)/K."""

    probs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if p.shape != v.shape or p.ndim != 1:
            raise ValueError("probs and values must be matching 1-D arrays")
        if p.size < 64:
            raise ValueError(f"quantile lattice needs K >= 64, got {p.size}")
        if np.any(np.diff(v) < -1e-12):
            raise ValueError("quantile values must be nondecreasing")
        p.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.probs.size


def _prob_lattice(K: int) -> np.ndarray:
    return (np.arange(K) + 0.5) / K


@dataclass(frozen=True)
class _PiecewiseQuantile:
    """Exact quantile function of an atomic measure.

    Piece i covers z in [z_edges[i], z_edges[i+1]] where the quantile is the
    affine segment from u_left[i] to u_right[i]; atoms give flat pieces, gaps
    between supports show up as jumps across piece boundaries.
    """

    z_edges: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray

    def eval(self, z: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.z_edges, z, side="right") - 1, 0,
                      self.u_left.size - 1)
        z0 = self.z_edges[idx]
        z1 = self.z_edges[idx + 1]
        t = (np.asarray(z) - z0) / (z1 - z0)
        return self.u_left[idx] + (self.u_right[idx] - self.u_left[idx]) * t

    def mean(self) -> float:
        lengths = np.diff(self.z_edges)
        return float(np.sum(lengths * 0.5 * (self.u_left + self.u_right)))

    def _piece_of(self, z_mid: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.z_edges, z_mid, side="right") - 1, 0,
                       self.u_left.size - 1)

    def _affine_at(self, idx: np.ndarray, z: np.ndarray) -> np.ndarray:
        z0 = self.z_edges[idx]
        z1 = self.z_edges[idx + 1]
        t = (z - z0) / (z1 - z0)
        return self.u_left[idx] + (self.u_right[idx] - self.u_left[idx]) * t


def _atomic_pieces(am: AtomicMeasure) -> _PiecewiseQuantile:
    xs = sorted({x for x, _ in am.atoms}
                | {l for l, _, _ in am.segments}
                | {r for _, r, _ in am.segments})
    dens = np.zeros(max(len(xs) - 1, 0))
    if am.segments:
        xs_arr = np.asarray(xs)
        for l, r, w in am.segments:
            i0 = int(np.searchsorted(xs_arr, l))
            i1 = int(np.searchsorted(xs_arr, r))
            dens[i0:i1] += w / (r - l)
    atom_at = {x: w for x, w in am.atoms}

    z_edges = [0.0]
    u_left, u_right = [], []
    z = 0.0
    for b, xb in enumerate(xs):
        w = atom_at.get(xb)
        if w is not None:
            z += w
            z_edges.append(z)
            u_left.append(xb)
            u_right.append(xb)
        if b < len(xs) - 1 and dens[b] > 0.0:
            z += dens[b] * (xs[b + 1] - xb)
            z_edges.append(z)
            u_left.append(xb)
            u_right.append(xs[b + 1])
    edges = np.asarray(z_edges)
    edges /= edges[-1]  # total weight is 1 within 1e-12; remove float drift
    edges[-1] = 1.0
    return _PiecewiseQuantile(edges, np.asarray(u_left), np.asarray(u_right))


def _density_quantile_values(n: Density, z: np.ndarray) -> np.ndarray:
    """Invert the trapezoidal CDF by monotone linear interpolation.

    Ties (zero-density cells) resolve to the leftmost preimage.
    """
    v = n.values
    h = n.grid.h
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))))
    cdf /= cdf[-1]
    idx = np.clip(np.searchsorted(cdf, z, side="left"), 1, cdf.size - 1)
    c0 = cdf[idx - 1]
    c1 = cdf[idx]
    denom = np.where(c1 > c0, c1 - c0, 1.0)
    frac = np.clip((z - c0) / denom, 0.0, 1.0)
    x = n.grid.x
    return x[idx - 1] + frac * (x[idx] - x[idx - 1])


def quantiles(n: Density | AtomicMeasure, K: int = DEFAULT_K) -> QuantileFn:
    """Pseudo-inverse of the CDF sampled on the midpoint lattice."""
    z = _prob_lattice(K)
    if isinstance(n, AtomicMeasure):
        vals = _atomic_pieces(n).eval(z)
    elif isinstance(n, Density):
        vals = _density_quantile_values(n, z)
    else:
        raise TypeError(f"unsupported measure type {type(n).__name__}")
    return QuantileFn(z, vals)


def measure_mean(n: Density | AtomicMeasure) -> float:
    if isinstance(n, AtomicMeasure):
        return n.mean()
    return density_mean(n)


def _merged_edges(pa: _PiecewiseQuantile, pb: _PiecewiseQuantile) -> np.ndarray:
    edges = np.union1d(pa.z_edges, pb.z_edges)
    keep = np.concatenate(([True], np.diff(edges) > 0.0))
    return edges[keep]


def _exact_l2_sq(pa: _PiecewiseQuantile, pb: _PiecewiseQuantile, offset: float = 0.0) -> float:
    """Exact integral of ((u - v) - offset)^2 dz via per-piece Simpson.

    On each merged piece both quantiles are affine, so the integrand is a
    quadratic and Simpson's rule is exact.
    """
    edges = _merged_edges(pa, pb)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    ia, ib = pa._piece_of(mid), pb._piece_of(mid)
    d_lo = pa._affine_at(ia, lo) - pb._affine_at(ib, lo) - offset
    d_mid = pa._affine_at(ia, mid) - pb._affine_at(ib, mid) - offset
    d_hi = pa._affine_at(ia, hi) - pb._affine_at(ib, hi) - offset
    return float(np.sum((hi - lo) / 6.0 * (d_lo**2 + 4.0 * d_mid**2 + d_hi**2)))


def _exact_l1(pa: _PiecewiseQuantile, pb: _PiecewiseQuantile) -> float:
    """Exact integral of |u - v| dz; affine differences may change sign inside
    a piece, in which case the piece is split at the root."""
    edges = _merged_edges(pa, pb)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    ia, ib = pa._piece_of(mid), pb._piece_of(mid)
    d0 = pa._affine_at(ia, lo) - pb._affine_at(ib, lo)
    d1 = pa._affine_at(ia, hi) - pb._affine_at(ib, hi)
    length = hi - lo
    same = d0 * d1 >= 0.0
    total = np.where(
        same,
        0.5 * length * (np.abs(d0) + np.abs(d1)),
        0.5 * length * (d0**2 + d1**2) / np.maximum(np.abs(d0) + np.abs(d1), 1e-300),
    )
    return float(np.sum(total))


def _both_atomic(n, m) -> bool:
    return isinstance(n, AtomicMeasure) and isinstance(m, AtomicMeasure)


def w2(n, m, K: int = DEFAULT_K) -> float:
    """2-Wasserstein distance: L^2 distance between quantile functions."""
    if _both_atomic(n, m):
        return float(np.sqrt(max(_exact_l2_sq(_atomic_pieces(n), _atomic_pieces(m)), 0.0)))
    u = quantiles(n, K).values
    v = quantiles(m, K).values
    return float(np.sqrt(np.mean((u - v) ** 2)))


def w1(n, m, K: int = DEFAULT_K) -> float:
    """1-Wasserstein distance: L^1 distance between quantile functions."""
    if _both_atomic(n, m):
        return _exact_l1(_atomic_pieces(n), _atomic_pieces(m))
    u = quantiles(n, K).values
    v = quantiles(m, K).values
    return float(np.mean(np.abs(u - v)))


def w_recentered(n, m, K: int = DEFAULT_K) -> float:
    """W2 after translating both measures to zero mean.

    Equals the minimum of W2(n, m(. - zeta)) over shifts zeta.
    """
    if _both_atomic(n, m):
        pa, pb = _atomic_pieces(n), _atomic_pieces(m)
        return float(np.sqrt(max(_exact_l2_sq(pa, pb, offset=pa.mean() - pb.mean()), 0.0)))
    u = quantiles(n, K).values
    v = quantiles(m, K).values
    d = (u - u.mean()) - (v - v.mean())
    return float(np.sqrt(np.mean(d**2)))


# ---------------------------------------------------------------------------
# multiplicative tilts and mixtures


def selection_integral(n, a: SelectionFn, shift: float = 0.0) -> float:
    """integral of a(x - shift) against the measure n."""
    if isinstance(n, Density):
        ax = eval_selection(a, n.grid.x - shift)
        return n.grid.trapz(ax * n.values)
    total = sum(w * eval_selection(a, x - shift) for x, w in n.atoms)
    if n.segments:
        nodes, wts = np.polynomial.legendre.leggauss(24)
        for l, r, w in n.segments:
            xg = 0.5 * (r - l) * nodes + 0.5 * (l + r)
            total += w / (r - l) * 0.5 * (r - l) * float(np.sum(wts * eval_selection(a, xg - shift)))
    return float(total)


def _tilt_atomic(n: AtomicMeasure, factor) -> AtomicMeasure:
    atoms = [(x, w * factor(x)) for x, w in n.atoms]
    segments = []
    for l, r, w in n.segments:
        xs = np.linspace(l, r, _TILT_SUBDIV + 1)
        f = factor(xs)
        cell = w / (r - l) * 0.5 * (xs[1] - xs[0]) * (f[:-1] + f[1:])
        for k in range(_TILT_SUBDIV):
            if cell[k] > 0.0:
                segments.append((xs[k], xs[k + 1], cell[k]))
    total = sum(w for _, w in atoms) + sum(w for _, _, w in segments)
    atoms = tuple((x, w / total) for x, w in atoms if w > 0.0)
    segments = tuple((l, r, w / total) for l, r, w in segments)
    return AtomicMeasure(atoms=atoms, segments=segments)


def _tilted(n, alpha: float, a: SelectionFn, shift: float):
    sel_mass = selection_integral(n, a, shift)
    if sel_mass <= 0.0:
        raise ZeroSelectionMassError("selection integral of the measure is not positive")

    if isinstance(n, Density):
        ax = eval_selection(a, n.grid.x - shift)
        return normalize(n.grid, n.values * (1.0 - alpha + alpha * ax / sel_mass))

    def factor(x):
        return (1.0 - alpha) + alpha * eval_selection(a, np.asarray(x) - shift) / sel_mass

    return _tilt_atomic(n, factor)


def tilt_interp(n, alpha: float, a: SelectionFn):
    """Mass-1 reweighting (1 - alpha + alpha a / integral(a n)) n."""
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"tilt strength must lie in [0, 0.5), got {alpha}")
    if alpha == 0.0:
        return n
    return _tilted(n, alpha, a, shift=0.0)


def tilt_translated(n, alpha: float, a: SelectionFn, Z: float):
    """Same tilt with the selection translated by Z: a(. - Z)."""
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"tilt strength must lie in [0, 0.5), got {alpha}")
    if alpha == 0.0:
        return n
    return _tilted(n, alpha, a, shift=Z)


def tail_mixture(n, p, alpha: float):
    """Convex mixture (1 - alpha) n + alpha p, mass 1."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return n
    if alpha == 1.0:
        return p
    if isinstance(n, Density) and isinstance(p, Density):
        if n.grid != p.grid:
            raise GridMismatchError("mixture operands live on different grids")
        return Density(n.grid, (1.0 - alpha) * n.values + alpha * p.values)
    if _both_atomic(n, p):
        weights: dict[float, float] = {}
        for x, w in n.atoms:
            weights[x] = weights.get(x, 0.0) + (1.0 - alpha) * w
        for x, w in p.atoms:
            weights[x] = weights.get(x, 0.0) + alpha * w
        atoms = tuple(sorted(weights.items()))
        segments = tuple((l, r, (1.0 - alpha) * w) for l, r, w in n.segments)
        segments += tuple((l, r, alpha * w) for l, r, w in p.segments)
        return AtomicMeasure(atoms=atoms, segments=segments)
    raise TypeError("tail_mixture requires both operands of the same representation")


def fitness_tilt(n: Density, alpha: float, a: SelectionFn) -> Density:
    """Birth-side reweighting (1 + alpha a) n / (1 + alpha I_n).

    This is the tilt the dynamics applies before each reproduction call; it
    is well defined for any alpha >= 0.
    """
    if alpha == 0.0:
        return n
    ax = eval_selection(a, n.grid.x)
    sel = n.grid.trapz(ax * n.values)
    return normalize(n.grid, n.values * (1.0 + alpha * ax) / (1.0 + alpha * sel))
