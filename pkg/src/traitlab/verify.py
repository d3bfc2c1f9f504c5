"""Named verification checks over every provable invariant of the model.

Each check measures one quantity, compares it against an explicit threshold,
and reports the outcome.  The same functions back the ``verify`` CLI
subcommand and the acceptance test suite, so the two can never drift apart.
All randomness flows from a single seeded generator so failures reproduce.

One check (`atomic_dirac_tilt_stated`) encodes a closed-form constant that
exact computation shows to be off by a factor of two; it is kept, marked as
an expected failure, next to the corrected-form check that passes at solver
precision.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_GRID,
    AtomicMeasure,
    Density,
    Grid,
    ModelParams,
    gaussian_density,
    mean,
    mixture_density,
)
from .dynamics import (
    check_lower_bound,
    check_tail_criterion,
    fit_exponential_rate,
    simulate,
)
from .kernels import SelectionFn, affine_ramp_selection, bimodal_benchmark_selection
from .macroscale import MacroField, F_prime, find_roots, ode_solve
from .reproduction import contraction_check, make_plan, reproduce_fast, reproduce_oracle
from .steady import solve_steady
from .transport import tilt_interp, tilt_translated, w2

SIGMA2_DEFAULT = 1.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    relation: str
    seconds: float
    detail: str = ""
    expected_fail: bool = False

    @property
    def ok(self) -> bool:
        """Expected-failure rows count as healthy only when they do fail."""
        return self.passed != self.expected_fail

    def status(self) -> str:
        if self.expected_fail:
            return "XFAIL" if not self.passed else "XPASS"
        return "PASS" if self.passed else "FAIL"


@dataclass
class VerifyReport:
    level: str
    seed: int
    results: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def format_table(self) -> str:
        lines = [f"verification level={self.level} seed={self.seed}"]
        for r in self.results:
            lines.append(
                f"{r.status():5s} {r.name:32s} measured={r.measured:.6g} "
                f"{r.relation} {r.threshold:.6g}  [{r.seconds:.2f}s]"
                + (f"  {r.detail}" if r.detail else "")
            )
        n_bad = sum(not r.ok for r in self.results)
        lines.append(f"{len(self.results)} checks, {n_bad} unexpected failures")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "status", "measured", "relation", "threshold", "seconds", "detail"])
            for r in self.results:
                w.writerow([r.name, r.status(), repr(r.measured), r.relation,
                            repr(r.threshold), f"{r.seconds:.3f}", r.detail])


# ---------------------------------------------------------------------------
# seeded random measures


def random_mixture_density(rng: np.random.Generator, grid: Grid,
                           max_components: int = 4,
                           center_span: float = 6.0,
                           var_range: tuple[float, float] = (0.4, 3.0),
                           target_mean: float | None = None) -> Density:
    k = int(rng.integers(2, max_components + 1))
    weights = rng.dirichlet(np.ones(k))
    centers = rng.uniform(-center_span, center_span, size=k)
    variances = rng.uniform(*var_range, size=k)
    if target_mean is not None:
        centers = centers - float(weights @ centers) + target_mean
    return mixture_density(grid, list(zip(weights, centers, variances)))


def random_mean_matched_pair(rng: np.random.Generator, grid: Grid,
                             min_w2: float = 0.05) -> tuple[Density, Density]:
    """Two distinct random mixtures sharing the same analytic mean."""
    for _ in range(64):
        target = float(rng.uniform(-4.0, 4.0))
        n = random_mixture_density(rng, grid, target_mean=target)
        m = random_mixture_density(rng, grid, target_mean=target)
        if w2(n, m) >= min_w2:
            return n, m
    raise RuntimeError("could not draw a non-degenerate mean-matched pair")


def random_lower_bounded_pair(rng: np.random.Generator, grid: Grid,
                              nu: float = 0.5, zbar: float = 0.0) -> tuple[Density, Density]:
    """Pair of densities with n, m >= nu * Gamma_nu(zbar - .) pointwise."""

    def one() -> Density:
        bulk = random_mixture_density(rng, grid, center_span=4.0)
        floor = gaussian_density(grid, zbar, nu)
        return Density(grid, nu * floor.values + (1.0 - nu) * bulk.values)

    return one(), one()


# ---------------------------------------------------------------------------
# individual checks


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def check_gaussian_fixed_point(threshold: float = 1e-4) -> CheckResult:
    def run():
        worst = 0.0
        for s2 in (0.5, 1.0, 2.0):
            plan = make_plan(DEFAULT_GRID, s2)
            for z in (-5.0, 0.0, 5.0):
                g = gaussian_density(DEFAULT_GRID, z, 2.0 * s2)
                out = reproduce_fast(plan, g, g)
                worst = max(worst, float(np.max(np.abs(out.values - g.values))))
        return worst

    worst, secs = _timed(run)
    return CheckResult("gaussian_fixed_point", worst <= threshold, worst, threshold,
                       "<=", secs, "sup residual over Z in {-5,0,5}, s2 in {0.5,1,2}")


def check_contraction(rng: np.random.Generator, threshold: float = 0.7072,
                      n_pairs: int = 50) -> CheckResult:
    def run():
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        worst = 0.0
        for _ in range(n_pairs):
            n, m = random_mean_matched_pair(rng, DEFAULT_GRID)
            worst = max(worst, contraction_check(plan, n, m))
        return worst

    worst, secs = _timed(run)
    return CheckResult("reproduction_contraction", worst <= threshold, worst, threshold,
                       "<=", secs, f"max W2 ratio over {n_pairs} mean-matched pairs")


def check_oracle_equivalence(rng: np.random.Generator, threshold: float = 1e-6,
                             n_pairs: int = 3) -> CheckResult:
    def run():
        grid = Grid(-20.0, 20.0, 128)
        plan = make_plan(grid, SIGMA2_DEFAULT)
        worst = 0.0
        for _ in range(n_pairs):
            n = random_mixture_density(rng, grid, var_range=(0.8, 3.0))
            m = random_mixture_density(rng, grid, var_range=(0.8, 3.0))
            fast = reproduce_fast(plan, n, m)
            slow = reproduce_oracle(grid, SIGMA2_DEFAULT, n, m)
            worst = max(worst, float(np.max(np.abs(fast.values - slow.values))))
        return worst

    worst, secs = _timed(run)
    return CheckResult("oracle_equivalence", worst <= threshold, worst, threshold,
                       "<=", secs, "sup |fast - quadrature| at N=128")


def check_center_of_mass(rng: np.random.Generator, threshold: float = 1e-8,
                         n_pairs: int = 20) -> CheckResult:
    def run():
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        worst = 0.0
        for _ in range(n_pairs):
            n = random_mixture_density(rng, DEFAULT_GRID)
            m = random_mixture_density(rng, DEFAULT_GRID)
            out = reproduce_fast(plan, n, m)
            worst = max(worst, abs(mean(out) - 0.5 * (mean(n) + mean(m))))
        return worst

    worst, secs = _timed(run)
    return CheckResult("center_of_mass", worst <= threshold, worst, threshold,
                       "<=", secs, f"bilinear mean conservation over {n_pairs} pairs")


def check_macro_roots(threshold: float = 0.5) -> CheckResult:
    def run():
        field_ = MacroField(SIGMA2_DEFAULT, bimodal_benchmark_selection(truncated=False))
        report = find_roots(field_, (-10.0, 10.0))
        roots = report.roots
        if len(roots) != 3:
            return float("inf"), f"expected 3 roots, found {len(roots)}"
        (z1, _, s1), (zu, _, su), (z2, _, s2) = roots
        deviation = max(abs(z1 + 5.0), abs(zu), abs(z2 - 5.0))
        if not (s1 and s2 and not su):
            return float("inf"), "stability pattern wrong"
        return deviation, f"roots at {z1:.4f}, {zu:.4f}, {z2:.4f}"

    (measured, detail), secs = _timed(run)
    return CheckResult("macro_root_structure", measured <= threshold, measured, threshold,
                       "<=", secs, detail)


BASIN_SWEEP_STARTS = (-10.0, -7.5, -5.0, -2.5, -0.25, 0.0, 0.25, 2.5, 5.0, 7.5, 10.0)


def check_basin_convergence(threshold: float = 0.5, t_final: float = 80.0,
                        dt: float = 0.02) -> CheckResult:
    def run():
        sel = bimodal_benchmark_selection(truncated=False)
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        field_ = MacroField(SIGMA2_DEFAULT, sel)
        worst = 0.0
        mismatches = []
        for z0 in BASIN_SWEEP_STARTS:
            params = ModelParams(1.0, SIGMA2_DEFAULT, sel, dt, t_final)
            rec = simulate(gaussian_density(DEFAULT_GRID, z0, 2.0 * SIGMA2_DEFAULT),
                           params, plan, record_every=50)
            _, ys = ode_solve(field_, z0, t_final, 0.01)
            z_end = float(rec.Z[-1])
            worst = max(worst, abs(abs(z_end) - 5.0))
            if z0 != 0.0 and np.sign(z_end) != np.sign(ys[-1]):
                mismatches.append(z0)
        detail = "all terminal signs match the macroscopic flow"
        if mismatches:
            worst = float("inf")
            detail = f"sign mismatches at Z0 in {mismatches}"
        return worst, detail

    (worst, detail), secs = _timed(run)
    return CheckResult("basin_convergence", worst <= threshold, worst, threshold,
                       "<=", secs, detail)


def check_macro_tracking(threshold: float = 0.1, z0: float = -8.0) -> CheckResult:
    def run():
        sel = bimodal_benchmark_selection(truncated=True)
        field_ = MacroField(SIGMA2_DEFAULT, sel)
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        sups = {}
        for alpha in (0.2, 0.1, 0.05):
            params = ModelParams(alpha, SIGMA2_DEFAULT, sel, 0.05, 50.0 / alpha)
            rec = simulate(gaussian_density(DEFAULT_GRID, z0, 2.0 * SIGMA2_DEFAULT),
                           params, plan, record_every=20)
            times = np.asarray(rec.times)
            ts, ys = ode_solve(field_, z0, alpha * float(times[-1]), 0.01)
            y_at = np.interp(alpha * times, ts, ys)
            sups[alpha] = float(np.max(np.abs(rec.Z - y_at)))
        monotone = sups[0.2] > sups[0.1] > sups[0.05]
        detail = " ".join(f"sup[{a}]={s:.4f}" for a, s in sups.items())
        if not monotone:
            return float("inf"), detail + " (not monotone in alpha)"
        return sups[0.1], detail

    (measured, detail), secs = _timed(run)
    return CheckResult("macro_tracking", measured <= threshold, measured, threshold,
                       "<=", secs, detail)


def check_steady_scaling(threshold: float = 2.0) -> CheckResult:
    def run():
        sel = bimodal_benchmark_selection(truncated=True)
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        field_ = MacroField(SIGMA2_DEFAULT, sel)
        zbar = find_roots(field_, (2.0, 8.0)).stable_roots()[0]
        ratios = []
        iters = []
        for alpha in (0.2, 0.1, 0.05):
            params = ModelParams(alpha, SIGMA2_DEFAULT, sel, 0.05, 10.0)
            res = solve_steady(params, plan, Z_init=5.0, Z_bar_macro=zbar)
            ratios.append(res.w2_to_gaussian / alpha)
            iters.append(res.iterations)
        spread = max(ratios) / min(ratios)
        return spread, f"w2g/alpha={['%.4f' % r for r in ratios]} iters={iters}"

    (spread, detail), secs = _timed(run)
    return CheckResult("steady_scaling", spread < threshold, spread, threshold,
                       "<", secs, detail)


def check_exponential_convergence(alpha: float = 0.1, t_final: float = 150.0) -> CheckResult:
    def run():
        sel = bimodal_benchmark_selection(truncated=True)
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        field_ = MacroField(SIGMA2_DEFAULT, sel)
        zbar = find_roots(field_, (2.0, 8.0)).stable_roots()[0]
        fprime = F_prime(field_, zbar)
        params = ModelParams(alpha, SIGMA2_DEFAULT, sel, 0.05, t_final)
        nbar = solve_steady(params, plan, Z_init=zbar, Z_bar_macro=zbar).density
        rec = simulate(gaussian_density(DEFAULT_GRID, zbar - 0.5, 2.0 * SIGMA2_DEFAULT),
                       params, plan, record_every=20, keep_states=True, early_stop=False)
        series = np.array([w2(s, nbar) for s in rec.states])
        slope = fit_exponential_rate(rec.times, series, tail_fraction=0.5)
        target = 0.5 * alpha * fprime
        return slope, target

    (slope, target), secs = _timed(run)
    return CheckResult("exponential_convergence", slope <= target, slope, target,
                       "<=", secs, "fitted log-W2 slope vs half the predicted rate")


def check_tilt_contraction(rng: np.random.Generator, n_pairs: int = 20) -> CheckResult:
    """Fitted constant in ratio <= 1 + C sqrt(alpha) must not grow as alpha shrinks."""

    def run():
        sel = bimodal_benchmark_selection(truncated=True)
        alphas = (0.01, 0.04, 0.16)
        pairs = [random_lower_bounded_pair(rng, DEFAULT_GRID) for _ in range(n_pairs)]
        fitted = {}
        for alpha in alphas:
            worst = 0.0
            for n, m in pairs:
                ratio = w2(tilt_interp(n, alpha, sel), tilt_interp(m, alpha, sel)) / w2(n, m)
                worst = max(worst, (ratio - 1.0) / np.sqrt(alpha))
            fitted[alpha] = worst
        monotone = fitted[0.01] <= fitted[0.04] <= fitted[0.16]
        detail = " ".join(f"C[{a}]={c:.4f}" for a, c in fitted.items())
        return (max(fitted.values()), monotone, detail)

    (c_fit, monotone, detail), secs = _timed(run)
    return CheckResult("tilt_contraction_constant", monotone, c_fit, 0.0,
                       "monotone in alpha", secs, detail)


DIRAC_PAIR = AtomicMeasure(atoms=((-1.0, 0.5), (1.0, 0.5)))


def _dirac_tilt_w2(alpha: float, z: float) -> float:
    ramp = affine_ramp_selection()
    return w2(tilt_translated(DIRAC_PAIR, alpha, ramp, 0.0),
              tilt_translated(DIRAC_PAIR, alpha, ramp, z))


def check_dirac_tilt_stated(threshold: float = 1e-3, alpha: float = 0.04) -> CheckResult:
    """Stated closed form (sqrt(a)/2) sqrt|1 - 1/(1 - Z/2)|.

    The mismatch interval between the two tilted quantile functions spans
    atoms at -1 and +1, so the integrand is 4, not 1; the stated constant is
    therefore half the exact value and this check is expected to fail.
    """

    def run():
        worst = 0.0
        for z in (0.1, 0.5):
            stated = 0.5 * np.sqrt(alpha) * np.sqrt(abs(1.0 - 1.0 / (1.0 - z / 2.0)))
            worst = max(worst, abs(_dirac_tilt_w2(alpha, z) - stated))
        return worst

    worst, secs = _timed(run)
    return CheckResult("atomic_dirac_tilt_stated", worst <= threshold, worst, threshold,
                       "<=", secs, "constant is half the exact two-point value",
                       expected_fail=True)


def check_dirac_tilt_exact(threshold: float = 1e-9, alpha: float = 0.04) -> CheckResult:
    """Exact closed form sqrt(alpha) sqrt|1 - 1/(1 - Z/2)| at quantile precision."""

    def run():
        worst = 0.0
        for z in (0.1, 0.5):
            exact = np.sqrt(alpha * abs(1.0 - 1.0 / (1.0 - z / 2.0)))
            worst = max(worst, abs(_dirac_tilt_w2(alpha, z) - exact))
        return worst

    worst, secs = _timed(run)
    return CheckResult("atomic_dirac_tilt_exact", worst <= threshold, worst, threshold,
                       "<=", secs)


def atom_segment_family(rho: float) -> AtomicMeasure:
    """Half mass at -1, rho/4 at 0, a uniform quarter on [0,1], rest at 1."""
    atoms = [(-1.0, 0.5)]
    if rho > 0.0:
        atoms.append((0.0, rho / 4.0))
    if rho < 1.0:
        atoms.append((1.0, (1.0 - rho) / 4.0))
    return AtomicMeasure(atoms=tuple(atoms), segments=((0.0, 1.0, 0.25),))


def check_atomic_ratio_growth(threshold: float = 0.8, alpha: float = 0.04) -> CheckResult:
    """Without a lower bound the tilt ratio grows like sqrt(alpha/|rho - rho'|).

    The measured tilt ratio must reach the predicted growth lower bound
    (scaled by the threshold) for every pair in the family, demonstrating the
    failure of any Lipschitz tilt estimate on these measures.
    """

    def run():
        ramp = affine_ramp_selection()
        rhos = (0.45, 0.5, 0.55)
        worst = float("inf")
        for i, r1 in enumerate(rhos):
            for r2 in rhos[i + 1:]:
                n1, n2 = atom_segment_family(r1), atom_segment_family(r2)
                base = w2(n1, n2)
                ratio = w2(tilt_interp(n1, alpha, ramp), tilt_interp(n2, alpha, ramp)) / base
                bound = (2.0 * np.sqrt(2.0 * alpha / ((15.0 - 2.0 * r1) * (15.0 - 2.0 * r2)))
                         * np.sqrt(abs(r1 - r2))) / (abs(r1 - r2) / np.sqrt(2.0))
                worst = min(worst, ratio / bound)
        return worst

    worst, secs = _timed(run)
    return CheckResult("atomic_ratio_growth", worst >= threshold, worst, threshold,
                       ">=", secs, "min measured/bound over the rho family")


def check_tail_propagation() -> CheckResult:
    def run():
        grid = Grid(-10.0, 10.0, 512)
        sel = SelectionFn(bumps=((1.0, 0.0, 1.0),), truncation_radius=4.0)
        params = ModelParams(0.1, SIGMA2_DEFAULT, sel, 0.05, 20.0)
        plan = make_plan(grid, SIGMA2_DEFAULT)
        n0 = gaussian_density(grid, 0.0, 2.0 * SIGMA2_DEFAULT)
        r0 = sel.support_radius() + 4.0 * SIGMA2_DEFAULT + 0.0
        rec = simulate(n0, params, plan, record_every=20, keep_states=True,
                       early_stop=False)
        worst = max(check_tail_criterion(s, r0)[1] for s in rec.states)
        return worst, r0

    (worst, r0), secs = _timed(run)
    return CheckResult("tail_propagation", worst < 0.0, worst, 0.0,
                       "<", secs, f"worst tail margin with R0={r0}")


def check_lower_bound_propagation(threshold: float = 1e-6) -> CheckResult:
    def run():
        sel = bimodal_benchmark_selection(truncated=True)
        plan = make_plan(DEFAULT_GRID, SIGMA2_DEFAULT)
        params = ModelParams(0.1, SIGMA2_DEFAULT, sel, 0.05, 500.0)
        n0 = gaussian_density(DEFAULT_GRID, -8.0, 2.0 * SIGMA2_DEFAULT)
        rec = simulate(n0, params, plan, record_every=50, keep_states=True)
        field_ = MacroField(SIGMA2_DEFAULT, sel)
        zbar = find_roots(field_, (-8.0, -2.0)).stable_roots()[0]
        return min(check_lower_bound(s, SIGMA2_DEFAULT / 2.0, zbar) for s in rec.states)

    worst, secs = _timed(run)
    return CheckResult("lower_bound_propagation", worst > threshold, worst, threshold,
                       ">", secs, "min density ratio against the reference Gaussian")


FAST_CHECKS = (
    "gaussian_fixed_point",
    "reproduction_contraction",
    "oracle_equivalence",
    "center_of_mass",
    "macro_root_structure",
    "steady_scaling",
    "exponential_convergence",
    "tilt_contraction_constant",
    "atomic_dirac_tilt_stated",
    "atomic_dirac_tilt_exact",
    "atomic_ratio_growth",
    "tail_propagation",
    "lower_bound_propagation",
)
FULL_ONLY_CHECKS = ("basin_convergence", "macro_tracking")


def run_verify(level: str = "fast", seed: int = 0,
               thresholds: dict[str, float] | None = None) -> VerifyReport:
    """Execute the named checks at the given level.

    thresholds overrides individual check thresholds by name (used by the
    tamper-sanity test, which flips one threshold and expects a failure).
    """
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    over = thresholds or {}
    rng = np.random.default_rng(seed)
    report = VerifyReport(level=level, seed=seed)

    def th(name: str, default: float) -> float:
        return float(over.get(name, default))

    report.results.append(check_gaussian_fixed_point(th("gaussian_fixed_point", 1e-4)))
    report.results.append(check_contraction(rng, th("reproduction_contraction", 0.7072)))
    report.results.append(check_oracle_equivalence(rng, th("oracle_equivalence", 1e-6)))
    report.results.append(check_center_of_mass(rng, th("center_of_mass", 1e-8)))
    report.results.append(check_macro_roots(th("macro_root_structure", 0.5)))
    report.results.append(check_steady_scaling(th("steady_scaling", 2.0)))
    report.results.append(check_exponential_convergence())
    report.results.append(check_tilt_contraction(rng))
    report.results.append(check_dirac_tilt_stated(th("atomic_dirac_tilt_stated", 1e-3)))
    report.results.append(check_dirac_tilt_exact(th("atomic_dirac_tilt_exact", 1e-9)))
    report.results.append(check_atomic_ratio_growth(th("atomic_ratio_growth", 0.8)))
    report.results.append(check_tail_propagation())
    report.results.append(check_lower_bound_propagation(th("lower_bound_propagation", 1e-6)))
    if level == "full":
        report.results.append(check_basin_convergence(th("basin_convergence", 0.5)))
        report.results.append(check_macro_tracking(th("macro_tracking", 0.1)))
    return report
