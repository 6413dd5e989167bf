import math

import numpy as np
import pytest
import scipy.stats

from grainconc import (
    BooleanModelSpec,
    FixedBall,
    FixedBox,
    FixedInterval,
    RandomBall,
    Realization,
    Window,
    clopper_pearson,
    estimate_tail,
    estimate_volume_fraction,
    exactly_once_volume,
    measure_volume,
    sample_realization,
)
from grainconc.simulate import lowdisc_points, sample_volumes

D1_SPEC = BooleanModelSpec(1, 1.0, FixedInterval(1.0))
D1_WINDOW = Window([0.0], [10.0])


def intervals_realization(pairs):
    centers = np.array([[(a + b) / 2.0] for a, b in pairs])
    halves = np.array([[(b - a) / 2.0] for a, b in pairs])
    return Realization("box", centers, halves)


class TestWindowAndSpec:
    def test_window_validation(self):
        with pytest.raises(ValueError):
            Window([0.0], [0.0])
        with pytest.raises(ValueError):
            Window([0.0, 0.0], [1.0])

    def test_volume_and_dilate(self):
        w = Window([0.0, 0.0], [2.0, 5.0])
        assert w.volume == 10.0
        assert w.dilate([1.0, 1.0]).volume == 4.0 * 7.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            BooleanModelSpec(4, 1.0, FixedBall(1.0))
        with pytest.raises(ValueError):
            BooleanModelSpec(2, 1.0, FixedInterval(1.0))
        with pytest.raises(ValueError):
            BooleanModelSpec(2, 1.0, FixedBox((1.0,)))

    def test_intensities(self):
        spec = BooleanModelSpec(2, 0.5, FixedBall(1.0))
        assert spec.gamma1() == pytest.approx(0.5 * math.pi)
        assert spec.gamma2() == pytest.approx(0.5 * math.pi**2)
        assert spec.volume_fraction() == pytest.approx(-math.expm1(-0.5 * math.pi))


class TestSampleRealization:
    def test_deterministic_for_fixed_seed(self):
        a = sample_realization(D1_SPEC, D1_WINDOW, 42)
        b = sample_realization(D1_SPEC, D1_WINDOW, 42)
        assert np.array_equal(a.centers, b.centers)
        assert np.array_equal(a.params, b.params)

    def test_negligible_intensity_gives_empty(self):
        spec = BooleanModelSpec(1, 1e-12, FixedInterval(1.0))
        real = sample_realization(spec, D1_WINDOW, 1)
        assert real.n_grains == 0

    def test_germ_count_mean_matches_dilated_volume(self):
        # expected count = intensity * (|W| + grain length) = 11
        n_reps = 20_000
        counts = [
            sample_realization(D1_SPEC, D1_WINDOW, seed).n_grains for seed in range(n_reps)
        ]
        se = math.sqrt(11.0 / n_reps)
        assert abs(np.mean(counts) - 11.0) <= 3.5 * se

    def test_csv_dump(self, tmp_path):
        real = sample_realization(D1_SPEC, D1_WINDOW, 3)
        path = tmp_path / "grains.csv"
        real.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x1,param"
        assert len(lines) == real.n_grains + 1


class TestMeasureVolume:
    def test_exact_union_of_overlapping_intervals(self):
        real = intervals_realization([(0.0, 1.0), (0.5, 2.0)])
        window = Window([0.0], [3.0])
        volume, se = measure_volume(real, window, "exact_1d")
        assert volume == pytest.approx(2.0, abs=1e-12)
        assert se == 0.0

    def test_no_grains_gives_zero(self):
        real = Realization("box", np.zeros((0, 1)), np.zeros((0, 1)))
        assert measure_volume(real, Window([0.0], [3.0]), "exact_1d")[0] == 0.0

    def test_exact_1d_requires_dimension_one(self):
        real = Realization("ball", np.zeros((1, 2)), np.ones(1))
        with pytest.raises(ValueError):
            measure_volume(real, Window([0.0, 0.0], [1.0, 1.0]), "exact_1d")

    def test_disc_area_by_grid(self):
        window = Window([0.0, 0.0], [10.0, 10.0])
        one_disc = Realization("ball", np.array([[5.0, 5.0]]), np.array([1.0]))
        volume, se = measure_volume(one_disc, window, "grid", n_points=1_000_000, rng=1)
        assert abs(volume - math.pi) <= 3.0 * se

    def test_exact_matches_grid_within_noise(self):
        real = sample_realization(D1_SPEC, D1_WINDOW, 8)
        exact, _ = measure_volume(real, D1_WINDOW, "exact_1d")
        approx, se = measure_volume(real, D1_WINDOW, "grid", n_points=200_000, rng=2)
        assert abs(exact - approx) <= 3.0 * se

    def test_quasi_mc_bit_reproducible(self):
        window = Window([0.0, 0.0], [10.0, 10.0])
        one_disc = Realization("ball", np.array([[5.0, 5.0]]), np.array([1.0]))
        a, se_a = measure_volume(one_disc, window, "quasi_mc", n_points=250_000)
        b, _ = measure_volume(one_disc, window, "quasi_mc", n_points=250_000)
        assert a == b
        assert se_a == 0.0
        assert a == pytest.approx(math.pi, rel=2e-3)

    def test_unknown_method_rejected(self):
        real = intervals_realization([(0.0, 1.0)])
        with pytest.raises(ValueError):
            measure_volume(real, Window([0.0], [3.0]), "bogus")


class TestExactlyOnce:
    def test_single_grain_equals_clipped_volume(self):
        real = intervals_realization([(-0.5, 1.0)])
        window = Window([0.0], [3.0])
        assert exactly_once_volume(real, window, "exact_1d") == pytest.approx(1.0, abs=1e-12)

    def test_coincident_grains_cancel(self):
        real = intervals_realization([(0.0, 1.0), (0.0, 1.0)])
        window = Window([0.0], [3.0])
        assert exactly_once_volume(real, window, "exact_1d") == 0.0

    def test_partial_overlap(self):
        real = intervals_realization([(0.0, 1.0), (0.5, 2.0)])
        window = Window([0.0], [3.0])
        assert exactly_once_volume(real, window, "exact_1d") == pytest.approx(1.5, abs=1e-12)

    def test_pathwise_below_union_volume(self):
        for seed in range(20):
            real = sample_realization(D1_SPEC, D1_WINDOW, seed)
            union, _ = measure_volume(real, D1_WINDOW, "exact_1d")
            once = exactly_once_volume(real, D1_WINDOW, "exact_1d")
            assert once <= union + 1e-12

    def test_pathwise_below_union_with_shared_points(self):
        window = Window([0.0, 0.0], [10.0, 10.0])
        spec = BooleanModelSpec(2, 0.3, FixedBall(1.0))
        real = sample_realization(spec, window, 5)
        union, _ = measure_volume(real, window, "grid", n_points=20_000, rng=99)
        once = exactly_once_volume(real, window, "grid", n_points=20_000, rng=99)
        assert once <= union + 1e-12


class TestClopperPearson:
    def test_limits_bracket_point_estimate(self):
        low, high = clopper_pearson(np.array([0, 5, 50, 100]), 100, 0.95)
        phat = np.array([0, 5, 50, 100]) / 100.0
        assert np.all(low <= phat + 1e-12)
        assert np.all(phat <= high + 1e-12)
        assert low[0] == 0.0 and high[-1] == 1.0

    def test_matches_beta_quantiles(self):
        low, high = clopper_pearson(np.array([7]), 50, 0.9)
        assert low[0] == pytest.approx(scipy.stats.beta.ppf(0.05, 7, 44), rel=1e-12)
        assert high[0] == pytest.approx(scipy.stats.beta.ppf(0.95, 8, 43), rel=1e-12)


class TestEstimators:
    def test_tail_estimate_mean_and_monotone(self):
        tail = estimate_tail(D1_SPEC, D1_WINDOW, np.linspace(0.25, 4.0, 8), 2000, 7)
        target = D1_SPEC.volume_fraction() * 10.0
        assert abs(tail.mean_f_hat - target) <= 3.5 * tail.se_mean
        assert tail.mean_f_ref == pytest.approx(target, rel=1e-12)
        assert np.all(np.diff(tail.tail_hat) <= 0.0)
        assert np.all(tail.ci_low <= tail.tail_hat) and np.all(tail.tail_hat <= tail.ci_high)

    def test_tail_zero_beyond_window_volume(self):
        tail = estimate_tail(D1_SPEC, D1_WINDOW, [10.5], 200, 1)
        assert tail.tail_hat[0] == 0.0

    def test_saturated_model_concentrates(self):
        spec = BooleanModelSpec(1, 50.0, FixedInterval(1.0))
        tail = estimate_tail(spec, D1_WINDOW, [0.05], 150, 2)
        assert tail.mean_f_hat == pytest.approx(10.0, rel=1e-3)
        assert tail.tail_hat[0] <= 0.05

    def test_n_reps_validated(self):
        with pytest.raises(ValueError):
            estimate_tail(D1_SPEC, D1_WINDOW, [1.0], 99, 1)

    def test_tail_csv(self, tmp_path):
        tail = estimate_tail(D1_SPEC, D1_WINDOW, [0.5, 1.0], 200, 3)
        path = tmp_path / "tail.csv"
        tail.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,tail,ci_low,ci_high"
        assert len(lines) == 3

    def test_translation_invariance(self):
        # shifting the window leaves the law of the covered volume unchanged
        shifted_window = D1_WINDOW.shift([123.25])
        a = sample_volumes(D1_SPEC, D1_WINDOW, 4000, 10)
        b = sample_volumes(D1_SPEC, shifted_window, 4000, 20)
        se = math.hypot(a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size))
        assert abs(a.mean() - b.mean()) <= 4.0 * se

    def test_volume_fraction_reference_model(self):
        p_hat, se = estimate_volume_fraction(D1_SPEC, D1_WINDOW, 200, 2000, 3)
        assert abs(p_hat - (1.0 - math.exp(-1.0))) <= 3.5 * se

    def test_volume_fraction_extremes(self):
        sparse = BooleanModelSpec(1, 1e-4, FixedInterval(1.0))
        p_hat, _ = estimate_volume_fraction(sparse, D1_WINDOW, 100, 200, 4)
        assert p_hat <= 0.01
        dense = BooleanModelSpec(1, 10.0, FixedInterval(1.0))
        p_hat, se = estimate_volume_fraction(dense, D1_WINDOW, 100, 200, 5)
        assert abs(p_hat - (1.0 - math.exp(-10.0))) <= max(4.0 * se, 2e-3)


class TestRandomBall:
    def test_truncation_quantile_validated(self):
        with pytest.raises(ValueError):
            RandomBall(scipy.stats.expon(scale=0.5), truncation_quantile=0.9)

    def test_bounded_radius_law_is_exact(self):
        grain = RandomBall(scipy.stats.uniform(loc=0.5, scale=0.5))
        assert grain.is_exact
        assert grain.radius_cap() == pytest.approx(1.0)
        assert grain.gamma1_truncation_bias(1) == 0.0
        # mean interval length = 2 * E[R] = 1.5
        assert grain.mean_volume(1) == pytest.approx(1.5, rel=1e-9)

    def test_truncated_exponential_bias_reported(self):
        grain = RandomBall(scipy.stats.expon(scale=0.5), truncation_quantile=1.0 - 1e-6)
        assert not grain.is_exact
        bias = grain.gamma1_truncation_bias(1)
        assert 0.0 < bias < 1e-4

    def test_simulated_mean_volume_matches(self):
        grain = RandomBall(scipy.stats.expon(scale=0.25))
        spec = BooleanModelSpec(1, 1.0, grain)
        values = sample_volumes(spec, D1_WINDOW, 3000, 21)
        # truncated model: reference mean from the truncated grain law
        target = -math.expm1(-spec.gamma1()) * D1_WINDOW.volume
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - target) <= 4.0 * se

    def test_tail_estimate_uses_empirical_reference_when_truncated(self):
        grain = RandomBall(scipy.stats.expon(scale=0.25))
        spec = BooleanModelSpec(1, 1.0, grain)
        tail = estimate_tail(spec, D1_WINDOW, [1.0], 200, 9)
        assert tail.mean_f_ref == tail.mean_f_hat


class TestOtherGrainShapes:
    def test_fixed_box_simulation_mean(self):
        spec = BooleanModelSpec(2, 0.25, FixedBox((1.0, 2.0)))
        window = Window([0.0, 0.0], [8.0, 8.0])
        values = sample_volumes(spec, window, 800, 31, method="grid", n_points=4096)
        target = spec.volume_fraction() * window.volume
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - target) <= 4.0 * se

    def test_random_ball_d2_simulation_mean(self):
        grain = RandomBall(scipy.stats.uniform(loc=0.5, scale=0.5))
        spec = BooleanModelSpec(2, 0.2, grain)
        window = Window([0.0, 0.0], [8.0, 8.0])
        values = sample_volumes(spec, window, 800, 33, method="grid", n_points=4096)
        target = spec.volume_fraction() * window.volume
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - target) <= 4.0 * se

    def test_d3_ball_simulation_mean(self):
        spec = BooleanModelSpec(3, 0.1, FixedBall(1.0))
        window = Window([0.0, 0.0, 0.0], [5.0, 5.0, 5.0])
        values = sample_volumes(spec, window, 400, 35, method="grid", n_points=4096)
        target = spec.volume_fraction() * window.volume
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - target) <= 4.0 * se


class TestLowDiscrepancy:
    def test_points_in_unit_cube_and_deterministic(self):
        a = lowdisc_points(1000, 3)
        b = lowdisc_points(1000, 3)
        assert np.array_equal(a, b)
        assert a.shape == (1000, 3)
        assert np.all((a >= 0.0) & (a < 1.0))

    def test_equidistribution(self):
        pts = lowdisc_points(4096, 2)
        frac = np.mean((pts[:, 0] < 0.5) & (pts[:, 1] < 0.5))
        assert frac == pytest.approx(0.25, abs=0.01)
