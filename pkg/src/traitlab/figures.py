"""Matplotlib rendering for the CLI report paths.

Every figure is derived from the same arrays that go into the CSV outputs,
so plots and data can never disagree.  All functions write PNG files and
return the path.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import Density, gaussian_density
from .kernels import eval_selection
from .macroscale import F_eval

DPI = 150


def save_trajectory_figure(rec, ode_series, alpha: float, path) -> Path:
    """Mean-trait track vs the macroscopic prediction, plus the Gaussian gap."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(rec.times, rec.Z, "k-", lw=1.5, label="mean trait Z(t)")
    if ode_series is not None:
        ts, ys = ode_series
        tt = np.asarray(rec.times)
        ax1.plot(tt, np.interp(alpha * tt, ts, ys), "k--", lw=1.2,
                 label="macroscopic Y(alpha t)")
    ax1.set_ylabel("mean trait")
    ax1.legend(loc="best", fontsize=9)
    ax1.grid(alpha=0.3)
    ax2.semilogy(rec.times, np.maximum(rec.W2_to_gaussian, 1e-16), "C0-", lw=1.2)
    ax2.set_xlabel("t")
    ax2.set_ylabel("W2 to matched Gaussian")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_snapshot_figure(rec, path) -> Path:
    """Density profiles at the stored snapshot times."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if rec.snapshots:
        cmap = plt.get_cmap("viridis")
        t_max = max(t for t, _ in rec.snapshots) or 1.0
        for t, snap in rec.snapshots:
            ax.plot(snap.grid.x, snap.values, color=cmap(t / t_max), lw=1.0,
                    label=f"t={t:g}")
        if len(rec.snapshots) <= 10:
            ax.legend(fontsize=8, loc="best")
    ax.set_xlabel("trait x")
    ax.set_ylabel("density")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_field_figure(field, report, path, alpha: float | None = None) -> Path:
    """Drift field F and the fitness profile, roots marked."""
    lo, hi = field.safe_range
    ys = np.linspace(lo, hi, 600)
    fs = np.array([F_eval(field, y) for y in ys])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    a_curve = eval_selection(field.selection, ys)
    scale = alpha if alpha is not None else 1.0
    ax1.plot(ys, 1.0 + scale * a_curve, "C2-", lw=1.3)
    ax1.set_ylabel("fitness 1 + alpha a(x)")
    ax1.grid(alpha=0.3)
    ax2.plot(ys, fs, "C0-", lw=1.3)
    ax2.axhline(0.0, color="k", lw=0.6)
    if report is not None:
        for z, _, stable in report.roots:
            ax2.plot([z], [0.0], "o", color="C3" if stable else "C1",
                     ms=7, mfc="none" if not stable else None)
    ax2.set_xlabel("mean trait Y")
    ax2.set_ylabel("drift F(Y)")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_steady_figure(result, sigma2: float, path) -> Path:
    """Converged profile against the matched Gaussian, residual history inset."""
    nbar: Density = result.density
    ref = gaussian_density(nbar.grid, result.Z_bar_macro, 2.0 * sigma2)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(nbar.grid.x, nbar.values, "C0-", lw=1.4, label="steady state")
    ax1.plot(ref.grid.x, ref.values, "k--", lw=1.1, label="matched Gaussian")
    ax1.set_xlabel("trait x")
    ax1.set_ylabel("density")
    ax1.legend(fontsize=9)
    ax1.grid(alpha=0.3)
    ax2.semilogy(np.arange(1, len(result.residual_history) + 1),
                 result.residual_history, "C1-", lw=1.2)
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("W2 residual")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_sweep_figure(entries, path) -> Path:
    """Overlaid mean-trait tracks for a family of runs.

    entries: list of (label, record, ode_series_or_None, alpha).
    """
    fig, ax = plt.subplots(figsize=(7.5, 5))
    cmap = plt.get_cmap("tab10")
    for i, (label, rec, ode_series, alpha) in enumerate(entries):
        color = cmap(i % 10)
        ax.plot(rec.times, rec.Z, "-", color=color, lw=1.3, label=label)
        if ode_series is not None:
            ts, ys = ode_series
            tt = np.asarray(rec.times)
            ax.plot(tt, np.interp(alpha * tt, ts, ys), "--", color=color, lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel("mean trait Z(t)")
    if len(entries) <= 12:
        ax.legend(fontsize=8, loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)
