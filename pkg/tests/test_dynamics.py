import numpy as np
import pytest

from traitlab.core import (
    Density,
    Grid,
    ModelParams,
    gaussian_density,
    mass,
    mean,
    mixture_density,
    normalize,
    second_moment,
)
from traitlab.dynamics import (
    check_lower_bound,
    check_tail_criterion,
    fit_exponential_rate,
    macro_discrepancies,
    rhs,
    simulate,
    step_euler,
)
from traitlab.errors import MisalignedError
from traitlab.kernels import SelectionFn, eval_selection, bimodal_benchmark_selection
from traitlab.macroscale import MacroField, F_prime, find_roots
from traitlab.reproduction import make_plan
from traitlab.steady import solve_steady
from traitlab.transport import w2

GRID = Grid(-16.0, 16.0, 512)
SEL = bimodal_benchmark_selection(truncated=True, radius=9.0)


@pytest.fixture(scope="module")
def plan():
    return make_plan(GRID, 1.0)


def params_for(alpha, dt=0.05, t_final=10.0, sel=SEL):
    return ModelParams(alpha, 1.0, sel, dt, t_final)


class TestRhs:
    def test_pure_reproduction_fixed_point(self, plan):
        n = gaussian_density(GRID, 0.0, 2.0)
        deriv = rhs(n, params_for(0.0), plan)
        assert np.max(np.abs(deriv)) <= 1e-4

    def test_rhs_integrates_to_zero(self, plan, rng):
        from traitlab.verify import random_mixture_density
        for alpha in (0.0, 0.3, 1.0):
            n = random_mixture_density(rng, GRID, center_span=4.0)
            deriv = rhs(n, params_for(alpha, dt=0.02), plan)
            assert abs(GRID.trapz(deriv)) <= 1e-8

    def test_mean_drift_identity(self, plan):
        # d/dt of the mean equals alpha I (1 + alpha I) [mean of a-weighted n / I - Z]
        alpha = 0.4
        n = mixture_density(GRID, [(0.6, -4.0, 1.5), (0.4, 4.0, 1.0)])
        deriv = rhs(n, params_for(alpha, dt=0.02), plan)
        measured = GRID.trapz(GRID.x * deriv)
        ax = eval_selection(SEL, GRID.x)
        sel_mass = GRID.trapz(ax * n.values)
        weighted_mean = GRID.trapz(GRID.x * ax * n.values) / sel_mass
        expected = alpha * sel_mass * (1.0 + alpha * sel_mass) * (weighted_mean - mean(n))
        assert measured == pytest.approx(expected, abs=1e-6)


class TestStepEuler:
    def test_gaussian_unmoved_without_selection(self, plan):
        n = gaussian_density(GRID, 0.0, 2.0)
        stepped = step_euler(n, params_for(0.0), plan)
        assert w2(stepped, n) <= 1e-6

    def test_mass_exactly_one(self, plan, rng):
        from traitlab.verify import random_mixture_density
        n = random_mixture_density(rng, GRID, center_span=4.0)
        stepped = step_euler(n, params_for(0.5, dt=0.05), plan)
        assert mass(stepped) == pytest.approx(1.0, abs=1e-12)

    def test_step_from_steady_state_is_tiny(self, plan):
        params = params_for(0.1)
        nbar = solve_steady(params, plan, Z_init=5.0).density
        stepped = step_euler(nbar, params, plan)
        assert w2(stepped, nbar) < 1e-6


class TestSimulate:
    def test_strong_selection_reaches_attractor(self, plan):
        params = params_for(1.0, dt=0.02, t_final=40.0)
        rec = simulate(gaussian_density(GRID, -10.0, 2.0), params, plan, record_every=50)
        assert rec.Z[-1] == pytest.approx(-5.0, abs=0.1)

    def test_mass_one_at_every_record(self, plan):
        params = params_for(0.5, t_final=5.0)
        rec = simulate(gaussian_density(GRID, -3.0, 2.0), params, plan,
                       record_every=10, keep_states=True)
        for state in rec.states:
            assert mass(state) == pytest.approx(1.0, abs=1e-12)

    def test_pure_reproduction_contracts_to_gaussian(self, plan):
        # without selection the distance to the matched Gaussian never grows
        params = params_for(0.0, t_final=8.0)
        n0 = mixture_density(GRID, [(0.5, -2.0, 0.5), (0.5, 2.0, 0.5)])
        rec = simulate(n0, params, plan, record_every=10, early_stop=False)
        diffs = np.diff(rec.W2_to_gaussian)
        assert np.all(diffs <= 1e-8)
        assert rec.W2_to_gaussian[-1] < rec.W2_to_gaussian[0]

    def test_mean_stays_in_hull(self, plan):
        # |Z| never exceeds max(|Z0|, selection support radius) + 0.1
        params = params_for(1.0, dt=0.02, t_final=30.0)
        z0 = -10.0
        rec = simulate(gaussian_density(GRID, z0, 2.0), params, plan, record_every=20)
        bound = max(abs(z0), SEL.support_radius()) + 0.1
        assert np.max(np.abs(rec.Z)) <= bound

    def test_second_moment_bounded(self, plan):
        params = params_for(0.5, t_final=20.0)
        n0 = gaussian_density(GRID, -8.0, 2.0)
        rec = simulate(n0, params, plan, record_every=20)
        assert np.max(rec.second_moment) <= 2.0 * second_moment(n0) + 4.0

    def test_first_order_in_dt(self, plan):
        terminal = {}
        for dt in (0.08, 0.04, 0.02):
            params = params_for(0.5, dt=dt, t_final=8.0)
            rec = simulate(gaussian_density(GRID, -7.0, 2.0), params, plan,
                           record_every=10_000, early_stop=False)
            terminal[dt] = rec.Z[-1]
        e1 = abs(terminal[0.08] - terminal[0.04])
        e2 = abs(terminal[0.04] - terminal[0.02])
        assert 1.5 <= e1 / e2 <= 2.5

    def test_early_stop_truncates(self, plan):
        params = params_for(1.0, dt=0.02, t_final=60.0)
        rec = simulate(gaussian_density(GRID, -5.0, 2.0), params, plan,
                       record_every=50, early_stop=True, stop_tol=1e-10)
        assert rec.times[-1] < 60.0 - 1e-9

    def test_snapshots_geometric_by_default(self, plan):
        params = params_for(0.5, t_final=10.0)
        rec = simulate(gaussian_density(GRID, 0.0, 2.0), params, plan,
                       record_every=10, early_stop=False)
        times = [t for t, _ in rec.snapshots]
        assert times[0] == 0.0
        for target in (1.0, 2.0, 4.0, 8.0, 10.0):
            assert any(abs(t - target) <= 0.05 for t in times)


class TestLowerBound:
    def test_gaussian_reference_ratio(self):
        n = gaussian_density(GRID, 0.0, 2.0)
        ratio = check_lower_bound(n, nu=0.5, Zbar=0.0, radius=10.0)
        # ratio of explicit gaussians, minimum at the centre
        assert ratio == pytest.approx(
            (1.0 / np.sqrt(4.0 * np.pi)) / (1.0 / np.sqrt(np.pi)), rel=1e-2)
        assert ratio > 0.0

    def test_hole_gives_zero(self):
        v = np.exp(-GRID.x**2 / 4.0)
        v[np.abs(GRID.x - 1.0) < 0.2] = 0.0
        n = normalize(GRID, v)
        assert check_lower_bound(n, nu=0.5, Zbar=0.0) == 0.0

    def test_positive_along_run(self, plan):
        params = params_for(0.5, t_final=5.0)
        rec = simulate(gaussian_density(GRID, -4.0, 2.0), params, plan,
                       record_every=10, keep_states=True)
        ratios = [check_lower_bound(s, 0.5, -5.0) for s in rec.states]
        assert min(ratios) > 0.0


class TestTailCriterion:
    def test_gaussian_passes(self):
        n = gaussian_density(GRID, 0.0, 2.0)
        ok, margin = check_tail_criterion(n, R0=4.0)
        assert ok and margin < 0.0

    def test_exponential_halflife_fails(self):
        n = normalize(GRID, np.exp(-np.abs(GRID.x) / 2.0))
        ok, margin = check_tail_criterion(n, R0=4.0)
        assert not ok
        # analytic margin: d/dx n = -n/2 on the right tail, so margin = n/2
        idx = np.argmin(np.abs(GRID.x - 4.0))
        assert margin == pytest.approx(n.values[idx] / 2.0, rel=0.05)

    def test_r0_must_be_inside_grid(self):
        n = gaussian_density(GRID, 0.0, 2.0)
        with pytest.raises(ValueError):
            check_tail_criterion(n, R0=20.0)


class TestMacroDiscrepancies:
    def test_identical_runs_give_zero_series(self, plan):
        params = params_for(0.3, t_final=3.0)
        rec = simulate(gaussian_density(GRID, -4.0, 2.0), params, plan,
                       record_every=10, keep_states=True, early_stop=False)
        out = macro_discrepancies(rec, rec, params)
        for key in ("dI", "dZ", "w", "tilde_mismatch", "composite"):
            assert np.max(out[key]) == 0.0

    def test_shifted_start_contracts_at_predicted_rate(self, plan):
        field = MacroField(1.0, SEL)
        zbar = find_roots(field, (2.0, 8.0)).stable_roots()[0]
        fprime = F_prime(field, zbar)
        alpha = 0.1
        params = params_for(alpha, t_final=100.0)
        rec_a = simulate(gaussian_density(GRID, zbar - 0.5, 2.0), params, plan,
                         record_every=20, keep_states=True, early_stop=False)
        rec_b = simulate(gaussian_density(GRID, zbar - 0.4, 2.0), params, plan,
                         record_every=20, keep_states=True, early_stop=False)
        out = macro_discrepancies(rec_a, rec_b, params)
        slope = fit_exponential_rate(out["t"], out["composite"], tail_fraction=0.5)
        assert slope <= 0.5 * alpha * fprime

    def test_selection_integral_difference_bounded(self, plan):
        alpha = 0.2
        params = params_for(alpha, t_final=20.0)
        rec_a = simulate(gaussian_density(GRID, -7.0, 2.0), params, plan,
                         record_every=20, keep_states=True, early_stop=False)
        rec_b = simulate(gaussian_density(GRID, -6.0, 2.0), params, plan,
                         record_every=20, keep_states=True, early_stop=False)
        out = macro_discrepancies(rec_a, rec_b, params)
        denom = out["dZ"] + out["w"]
        sel_ok = denom > 1e-6
        ratios = out["dI"][sel_ok] / denom[sel_ok]
        assert np.max(ratios) < 5.0

    def test_misaligned_records_rejected(self, plan):
        params = params_for(0.3, t_final=2.0)
        rec_a = simulate(gaussian_density(GRID, -4.0, 2.0), params, plan,
                         record_every=10, keep_states=True, early_stop=False)
        rec_b = simulate(gaussian_density(GRID, -4.0, 2.0), params, plan,
                         record_every=20, keep_states=True, early_stop=False)
        with pytest.raises(MisalignedError):
            macro_discrepancies(rec_a, rec_b, params)

    def test_states_required(self, plan):
        params = params_for(0.3, t_final=2.0)
        rec = simulate(gaussian_density(GRID, -4.0, 2.0), params, plan,
                       record_every=10, early_stop=False)
        with pytest.raises(ValueError):
            macro_discrepancies(rec, rec, params)
