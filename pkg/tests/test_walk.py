"""Unit tests for the B-undo walker analysis."""

import numpy as np
import pytest

from src.errors import BudgetTooLarge, NoCrossing
from src.walk import (
    LAMBDA_GRID,
    WalkParams,
    backstep_probability,
    crossing,
    exact_success,
    first_step_probabilities,
    limit_success,
    per_k_curves,
    sample_walks,
    simulate_walks,
    success_curve,
    success_probability,
    walk_condition_statistics,
)


class TestBackstep:
    """Tests for the back-step probability."""

    def test_first_position(self):
        lam = 0.6
        assert np.isclose(backstep_probability(lam, 1), 2 * lam**2 / (1 + lam**2) ** 2)

    def test_far_positions_approach_constant(self):
        lam = 0.6
        assert np.isclose(backstep_probability(lam, 200), lam**2 / (1 + lam**2))

    def test_vectorized(self):
        values = backstep_probability(0.5, np.arange(1, 6))
        assert values.shape == (5,)
        assert np.all(np.diff(values) < 0)


class TestExactSuccess:
    """Tests for exact_success."""

    def test_methods_agree(self):
        result = exact_success(WalkParams(lam=0.6, n_max=12), method="both")
        assert result.method_gap < 1e-12
        assert np.isclose(sum(result.first_passage), result.p_n)

    def test_one_step(self):
        assert np.isclose(success_probability(0.6, 1), backstep_probability(0.6, 1))

    def test_absorption_only_on_odd_steps(self):
        passage = exact_success(WalkParams(lam=0.7, n_max=9)).first_passage
        assert all(p == 0.0 for p in passage[1::2])

    def test_monotone_in_budget(self):
        values = [success_probability(0.6, n) for n in (1, 5, 10, 20)]
        assert values == sorted(values)

    @pytest.mark.parametrize("lam", [0.3, 0.5, 0.6])
    def test_limit(self, lam):
        assert abs(success_probability(lam, 2000) - limit_success(lam)) < 1e-9

    def test_enumeration_budget(self):
        with pytest.raises(BudgetTooLarge):
            exact_success(WalkParams(lam=0.5, n_max=41), method="enumerate")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            exact_success(WalkParams(lam=0.5, n_max=3), method="guess")


class TestWalkParams:
    """Tests for lambda validation."""

    @pytest.mark.parametrize("lam", [0.0, 1.0, 1.5, -0.2, float("nan"), True])
    def test_rejects_out_of_range(self, lam):
        with pytest.raises(ValueError, match="Lambda"):
            WalkParams(lam=lam, n_max=3)

    def test_success_probability_rejects_one(self):
        with pytest.raises(ValueError):
            success_probability(1.0, 5)

    def test_sampling_rejects_bad_lambda(self, rng):
        with pytest.raises(ValueError):
            sample_walks(1.2, 5, 10, rng)

    def test_accepts_interior(self):
        assert WalkParams(lam=0.999, n_max=1).lam == 0.999


class TestCrossing:
    """Tests for crossing."""

    def test_site_threshold(self):
        assert abs(crossing(10, 0.593) - 0.6714) < 5e-4

    def test_unreachable_target(self):
        with pytest.raises(NoCrossing):
            crossing(10, 0.99)

    def test_root_is_exact(self):
        lam = crossing(6, 0.4)
        assert np.isclose(success_probability(lam, 6), 0.4, atol=1e-10)


class TestCurves:
    """Tests for the success curves."""

    def test_default_grid(self):
        curve = success_curve(10)
        assert len(curve.values) == len(LAMBDA_GRID) == 200
        assert np.isclose(curve.lams[0], 0.01)

    def test_per_k_rows_sum_to_success(self):
        lams = [0.3, 0.6, 0.9]
        rows = per_k_curves(8, lams)
        assert rows.shape == (3, 8)
        assert np.allclose(rows.sum(axis=1), [success_probability(lam, 8) for lam in lams])


class TestStatistics:
    """Tests for the imaginary-angle walk statistics."""

    def test_first_step_probabilities(self):
        plus, minus = first_step_probabilities(0.3, 0.9)
        assert np.isclose(plus + minus, 1.0)
        assert np.isclose(plus - minus, np.cos(0.6) * np.cos(1.8))

    def test_condition_frequencies(self, rng):
        stats = walk_condition_statistics(200_000, rng)
        assert abs(stats["stray"] - 0.315) < 0.01
        assert abs(stats["literal"] - 0.5) < 0.01
        assert stats["turn_back"] == 0.0
        assert stats["samples"] == 200_000


class TestSampling:
    """Tests for Monte Carlo walks."""

    def test_sampled_fraction(self, rng):
        estimate = simulate_walks(0.6, 10, 20_000, rng)
        exact = success_probability(0.6, 10)
        assert abs(estimate.success_fraction - exact) < 5 * estimate.stderr

    def test_zero_budget_never_succeeds(self, rng):
        assert not sample_walks(0.6, 0, 100, rng).any()
