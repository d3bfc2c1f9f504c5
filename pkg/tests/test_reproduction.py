from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from traitlab.core import Grid, boundary_mass, gaussian_density, mean, mixture_density, variance
from traitlab.errors import (
    DegeneratePairError,
    GridMismatchError,
    MeansDifferError,
    TooLargeError,
)
from traitlab.reproduction import (
    contraction_check,
    make_plan,
    reproduce_fast,
    reproduce_fast_with_drift,
    reproduce_oracle,
)
from traitlab.verify import random_mean_matched_pair, random_mixture_density

GRID128 = Grid(-20.0, 20.0, 128)


class TestFixedPoint:
    @pytest.mark.parametrize("sigma2", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("center", [-5.0, 0.0, 5.0])
    def test_gaussian_is_fixed(self, grid_default, sigma2, center):
        plan = make_plan(grid_default, sigma2)
        g = gaussian_density(grid_default, center, 2.0 * sigma2)
        out = reproduce_fast(plan, g, g)
        assert np.max(np.abs(out.values - g.values)) <= 1e-4

    def test_mass_drift_small(self, plan_default, grid_default):
        n = gaussian_density(grid_default, 1.0, 2.0)
        m = gaussian_density(grid_default, -2.0, 1.0)
        assert boundary_mass(n) < 1e-10 and boundary_mass(m) < 1e-10
        _, drift = reproduce_fast_with_drift(plan_default, n, m)
        assert abs(drift) <= 1e-6


class TestBilinearStructure:
    def test_mean_is_midparent_average(self, plan_default, grid_default, rng):
        for _ in range(5):
            n = random_mixture_density(rng, grid_default)
            m = random_mixture_density(rng, grid_default)
            out = reproduce_fast(plan_default, n, m)
            assert mean(out) == pytest.approx(0.5 * (mean(n) + mean(m)), abs=1e-8)

    def test_sharp_parents_give_midparent_gaussian(self, plan_default, grid_default):
        # near-atomic parents at a and b: offspring is the mixing kernel
        # centred at (a+b)/2 with variance sigma2 + (var_a + var_b)/4
        a_loc, b_loc = -1.0, 2.0
        n = gaussian_density(grid_default, a_loc, 0.01)
        m = gaussian_density(grid_default, b_loc, 0.01)
        out = reproduce_fast(plan_default, n, m)
        ref = gaussian_density(grid_default, 0.5 * (a_loc + b_loc), 1.0 + 0.005)
        assert np.max(np.abs(out.values - ref.values)) <= 1e-6

    def test_variance_identity(self, plan_default, grid_default):
        n = mixture_density(grid_default, [(0.7, 0.5, 1.7), (0.3, -1.0, 0.6)])
        out = reproduce_fast(plan_default, n, n)
        assert variance(out) == pytest.approx(1.0 + variance(n) / 2.0, abs=1e-4)

    def test_grid_mismatch(self, plan_default):
        other = gaussian_density(Grid(-16.0, 16.0, 512), 0.0, 1.0)
        with pytest.raises(GridMismatchError):
            reproduce_fast(plan_default, other, other)


class TestOracle:
    def test_agrees_with_fast_path(self, rng):
        plan = make_plan(GRID128, 1.0)
        for _ in range(3):
            n = random_mixture_density(rng, GRID128, var_range=(0.8, 3.0))
            m = random_mixture_density(rng, GRID128, var_range=(0.8, 3.0))
            fast = reproduce_fast(plan, n, m)
            slow = reproduce_oracle(GRID128, 1.0, n, m)
            assert np.max(np.abs(fast.values - slow.values)) <= 1e-6

    def test_symmetric_in_parents(self, rng):
        n = random_mixture_density(rng, GRID128)
        m = random_mixture_density(rng, GRID128)
        ab = reproduce_oracle(GRID128, 1.0, n, m)
        ba = reproduce_oracle(GRID128, 1.0, m, n)
        assert np.array_equal(ab.values, ba.values)

    def test_size_guard(self, grid_default):
        n = gaussian_density(grid_default, 0.0, 1.0)
        with pytest.raises(TooLargeError):
            reproduce_oracle(grid_default, 1.0, n, n)

    def test_oracle_variance_identity(self):
        n = gaussian_density(GRID128, 0.3, 1.4)
        out = reproduce_oracle(GRID128, 1.0, n, n)
        assert variance(out) == pytest.approx(1.0 + 1.4 / 2.0, abs=1e-4)


class TestContraction:
    def test_random_pairs_below_bound(self, plan_default, grid_default, rng):
        worst = 0.0
        for _ in range(10):
            n, m = random_mean_matched_pair(rng, grid_default)
            worst = max(worst, contraction_check(plan_default, n, m))
        assert worst <= 0.7072

    def test_gaussian_pair_unequal_variances(self, plan_default, grid_default):
        n = gaussian_density(grid_default, 0.0, 1.0)
        m = gaussian_density(grid_default, 0.0, 3.0)
        ratio = contraction_check(plan_default, n, m)
        # closed form |sqrt(1 + v/2) - sqrt(1 + w/2)| / |sqrt(v) - sqrt(w)|
        expected = (np.sqrt(1.0 + 1.5) - np.sqrt(1.0 + 0.5)) / (np.sqrt(3.0) - 1.0)
        assert ratio == pytest.approx(expected, abs=1e-3)
        assert ratio <= 1.0 / np.sqrt(2.0)

    def test_identical_inputs_degenerate(self, plan_default, grid_default):
        n = gaussian_density(grid_default, 0.0, 1.0)
        with pytest.raises(DegeneratePairError):
            contraction_check(plan_default, n, n)

    def test_means_must_match(self, plan_default, grid_default):
        n = gaussian_density(grid_default, 0.0, 1.0)
        m = gaussian_density(grid_default, 0.5, 1.0)
        with pytest.raises(MeansDifferError):
            contraction_check(plan_default, n, m)


def test_plan_shared_across_threads(plan_default, grid_default, rng):
    # the plan is immutable; concurrent applications match the serial results
    inputs = [random_mixture_density(rng, grid_default) for _ in range(8)]
    serial = [reproduce_fast(plan_default, n, n).values for n in inputs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(lambda n: reproduce_fast(plan_default, n, n).values, inputs))
    for s, p in zip(serial, parallel):
        assert np.array_equal(s, p)
