"""Command-line entry points: simulate, sweep, steady, macro, verify.

Exit codes: 0 success, 1 verification-check failure, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import figures
from .config import RunConfig, combo_label, config_from_mapping, load_config, parse_kv_text, parse_sweep_spec
from .core import boundary_mass, density_to_csv
from .dynamics import simulate
from .errors import ConfigError, NumericalError, TraitLabError
from .macroscale import MacroField, F_eval, find_roots, ode_interp, ode_solve
from .reproduction import make_plan
from .steady import gaussian_proximity, solve_steady
from .verify import run_verify

log = logging.getLogger("traitlab")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

BOUNDARY_MASS_WARN = 1e-8


def _worker_count() -> int:
    env = os.environ.get("TRAITLAB_WORKERS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ConfigError(f"TRAITLAB_WORKERS must be an integer, got {env!r}") from None
    return min(os.cpu_count() or 1, 4)


def _ensure_out_dir(cfg: RunConfig) -> Path:
    if cfg.out_dir is None:
        raise ConfigError("missing config field 'outputs.dir'")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _search_interval(cfg: RunConfig, field: MacroField) -> tuple[float, float]:
    """Explicit macro.search_* wins; otherwise the safe range capped at +-10."""
    if cfg.macro_search is not None:
        return cfg.macro_search
    lo, hi = field.safe_range
    return (max(lo, -10.0), min(hi, 10.0))


def _run_one_simulation(cfg: RunConfig, out_dir: Path, render: bool = True):
    params = cfg.model_params()
    plan = make_plan(cfg.grid, cfg.sigma2)
    n0 = cfg.build_initial()
    if boundary_mass(n0) > BOUNDARY_MASS_WARN:
        log.warning("initial density carries %.2e mass in the boundary cells",
                    boundary_mass(n0))
    rec = simulate(
        n0, params, plan,
        record_every=cfg.record_every,
        snapshot_times=cfg.snapshot_times,
        early_stop=cfg.early_stop,
        stop_tol=cfg.stop_tol,
        K=cfg.quantile_k,
    )
    final_state = rec.snapshots[-1][1] if rec.snapshots else n0
    if boundary_mass(final_state) > BOUNDARY_MASS_WARN:
        log.warning("final density carries %.2e mass in the boundary cells",
                    boundary_mass(final_state))

    rec.write_csv(out_dir / "trajectory.csv")
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for t, snap in rec.snapshots:
        density_to_csv(snap, snap_dir / f"density_t{t:012.6f}.csv")

    field = MacroField(cfg.sigma2, cfg.selection, cfg.grid)
    times = np.asarray(rec.times)
    sup_err = 0.0
    ode_series = None
    if cfg.alpha > 0.0 and times[-1] > 0.0:
        ode_series = ode_solve(field, float(rec.Z[0]), cfg.alpha * float(times[-1]),
                               cfg.macro_ode_dt)
        y_at = ode_interp(*ode_series, cfg.alpha * times)
        sup_err = float(np.max(np.abs(rec.Z - y_at)))
        with open(out_dir / "macro_comparison.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Z", "Y_alpha_t"])
            for trow, zrow, yrow in zip(times, rec.Z, y_at):
                w.writerow([repr(float(trow)), repr(float(zrow)), repr(float(yrow))])
    if cfg.figures and render:
        _render_simulation_figures(cfg, out_dir, rec, ode_series)
    return rec, ode_series, sup_err


def _render_simulation_figures(cfg: RunConfig, out_dir: Path, rec, ode_series) -> None:
    figures.save_trajectory_figure(rec, ode_series, cfg.alpha, out_dir / "fig_trajectory.png")
    figures.save_snapshot_figure(rec, out_dir / "fig_snapshots.png")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out_dir = _ensure_out_dir(cfg)
    rec, _, sup_err = _run_one_simulation(cfg, out_dir)
    print(f"simulate: {len(rec.times)} records to t={rec.times[-1]:g}, "
          f"terminal Z={rec.Z[-1]:.6f}, sup|Z - Y|={sup_err:.4f}, outputs in {out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base_text = Path(args.config)
    if not base_text.exists():
        raise ConfigError(f"config file not found: {base_text}")
    base_mapping = parse_kv_text(base_text.read_text(), source=str(base_text))
    combos = parse_sweep_spec(args.sweep_spec)
    base_cfg = config_from_mapping(dict(base_mapping), source=str(base_text))
    out_root = _ensure_out_dir(base_cfg)

    def one(combo: dict[str, str]):
        # figure rendering is deferred to the main thread: simulations are
        # thread-safe, the plotting backend is not
        label = combo_label(combo)
        mapping = dict(base_mapping)
        mapping.update(combo)
        mapping["outputs.dir"] = str(out_root / label)
        cfg = config_from_mapping(mapping, source=f"{base_text}+{label}")
        sub_dir = _ensure_out_dir(cfg)
        try:
            rec, ode_series, sup_err = _run_one_simulation(cfg, sub_dir, render=False)
            return (label, combo, cfg, rec, ode_series, sup_err, "ok")
        except TraitLabError as exc:  # partial-failure policy: continue + mark
            log.error("sweep combination %s failed: %s", label, exc)
            return (label, combo, cfg, None, None, float("nan"), f"failed: {exc}")

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        results = list(pool.map(one, combos))

    for label, _, cfg, rec, ode_series, _, status in results:
        if rec is not None and cfg.figures:
            _render_simulation_figures(cfg, out_root / label, rec, ode_series)

    keys = sorted(combos[0]) if combos else []
    with open(out_root / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + ["status", "terminal_Z", "sup_Z_minus_Y", "final_W2_to_gaussian"])
        for label, combo, cfg, rec, _, sup_err, status in results:
            row = [combo[k] for k in keys]
            if rec is None:
                row += [status, "", "", ""]
            else:
                row += [status, repr(float(rec.Z[-1])), repr(sup_err),
                        repr(float(rec.W2_to_gaussian[-1]))]
            w.writerow(row)
    if base_cfg.figures:
        entries = [(label, rec, ode_series, cfg.alpha)
                   for label, _, cfg, rec, ode_series, _, status in results if rec is not None]
        if entries:
            figures.save_sweep_figure(entries, out_root / "fig_sweep.png")
    n_failed = sum(1 for r in results if r[6] != "ok")
    print(f"sweep: {len(results)} combinations ({n_failed} failed), index in {out_root/'index.csv'}")
    return EXIT_OK if n_failed == 0 else EXIT_NUMERICAL


def cmd_steady(args) -> int:
    cfg = load_config(args.config, require_initial=False)
    out_dir = _ensure_out_dir(cfg)
    params = cfg.model_params()
    plan = make_plan(cfg.grid, cfg.sigma2)
    field = MacroField(cfg.sigma2, cfg.selection, cfg.grid)
    report = find_roots(field, _search_interval(cfg, field), cfg.macro_root_tol)
    z_init = cfg.steady_z_init
    if z_init is None:
        stable = report.stable_roots()
        if not stable:
            raise ConfigError("no stable macroscopic root found; set steady.z_init explicitly")
        z_init = stable[0]
    stable = report.stable_roots()
    z_bar = min(stable, key=lambda z: abs(z - z_init)) if stable else None

    result = solve_steady(
        params, plan, z_init,
        fixed_tol=cfg.steady_fixed_tol,
        max_iter=cfg.steady_max_iter,
        damping=cfg.steady_damping,
        Z_bar_macro=z_bar,
        K=cfg.quantile_k,
    )
    density_to_csv(result.density, out_dir / "steady_density.csv")
    gauge = gaussian_proximity(result.density, cfg.alpha, cfg.sigma2,
                               result.Z_bar_macro, cfg.quantile_k)
    summary = (
        f"iterations={result.iterations} residual={result.residual:.3e} "
        f"w2_to_gaussian={result.w2_to_gaussian:.6e} mean={result.mean:.8f} "
        f"Z_bar={result.Z_bar_macro:.8f} proximity_gauge={gauge:.6e}"
    )
    (out_dir / "steady_summary.txt").write_text(summary + "\n")
    with open(out_dir / "steady_residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "w2_residual"])
        for i, r in enumerate(result.residual_history, start=1):
            w.writerow([i, repr(float(r))])
    if cfg.figures:
        figures.save_steady_figure(result, cfg.sigma2, out_dir / "fig_steady.png")
    print(f"steady: {summary}")
    print(f"steady: outputs in {out_dir}")
    return EXIT_OK


def cmd_macro(args) -> int:
    cfg = load_config(args.config, require_initial=False)
    out_dir = _ensure_out_dir(cfg)
    field = MacroField(cfg.sigma2, cfg.selection, cfg.grid)
    search = _search_interval(cfg, field)
    report = find_roots(field, search, cfg.macro_root_tol)

    with open(out_dir / "roots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["root", "F_prime", "stable"])
        for z, fp, stable in report.roots:
            w.writerow([repr(float(z)), repr(float(fp)), stable])
    lo, hi = search
    ys = np.linspace(lo, hi, 801)
    with open(out_dir / "drift_field.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Y", "F"])
        for y in ys:
            w.writerow([repr(float(y)), repr(F_eval(field, y))])
    ode_out = None
    if cfg.macro_ode_y0 is not None:
        t_final = cfg.macro_ode_t_final if cfg.macro_ode_t_final is not None else 50.0
        ode_out = ode_solve(field, cfg.macro_ode_y0, t_final, cfg.macro_ode_dt)
        with open(out_dir / "ode_series.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Y"])
            for trow, yrow in zip(*ode_out):
                w.writerow([repr(float(trow)), repr(float(yrow))])
    if cfg.figures:
        figures.save_field_figure(field, report, out_dir / "fig_field.png", alpha=cfg.alpha)

    print(f"macro: {len(report.roots)} root(s) in [{lo:g}, {hi:g}]")
    for z, fp, stable in report.roots:
        kind = "stable" if stable else "unstable"
        print(f"  root {z:+.6f}  F'={fp:+.6f}  ({kind})")
    if ode_out is not None:
        print(f"  ODE from Y0={cfg.macro_ode_y0:g}: terminal Y={ode_out[1][-1]:.6f}")
    print(f"macro: outputs in {out_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verify(level=args.level, seed=args.seed)
    print(report.format_table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / "verify_report.csv")
        print(f"verify: report written to {out/'verify_report.csv'}")
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traitlab",
        description="Trait-structured sexual population dynamics laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate the dynamics from a config file")
    p_sim.add_argument("config", help="path to a key=value run configuration")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a cartesian sweep of simulations")
    p_sweep.add_argument("config", help="base run configuration")
    p_sweep.add_argument("sweep_spec", help="key = v1, v2, ... override lists")
    p_sweep.set_defaults(func=cmd_sweep)

    p_steady = sub.add_parser("steady", help="solve for the steady state")
    p_steady.add_argument("config")
    p_steady.set_defaults(func=cmd_steady)

    p_macro = sub.add_parser("macro", help="macroscopic drift field, roots and ODE")
    p_macro.add_argument("config")
    p_macro.set_defaults(func=cmd_macro)

    p_ver = sub.add_parser("verify", help="run the verification suite")
    p_ver.add_argument("--level", choices=("fast", "full"), default="fast")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", default=None, help="directory for the machine-readable report")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TraitLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
