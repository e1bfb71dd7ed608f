"""Closed forms vs Monte Carlo, exact cascade arithmetic, robustness checks."""

import math
from fractions import Fraction

import pytest

from vaultledger.security import (
    AttackParams,
    SecurityError,
    acceptance_probability_estimate,
    cascade_breach_probability,
    catch_up_probability,
    epsilon_robustness_ratio,
    exact_decimal,
    model_robustness,
    simulate_attack,
    walk_single,
)


class TestCatchUpClosedForm:
    def test_no_hash_power_never_catches_up(self):
        for z in (1, 2, 6, 50):
            assert catch_up_probability(0.0, z) == 0.0

    def test_level_race_is_certain(self):
        for q in (0.0, 0.1, 0.3, 0.49, 0.9):
            assert catch_up_probability(q, 0) == 1.0

    def test_majority_attacker_always_wins(self):
        assert catch_up_probability(0.5, 7) == 1.0
        assert catch_up_probability(0.7, 3) == 1.0

    def test_known_value(self):
        assert catch_up_probability(0.25, 2) == pytest.approx((0.25 / 0.75) ** 2)

    def test_strictly_decreasing_in_z(self):
        for q in (0.1, 0.2, 0.3, 0.4):
            values = [catch_up_probability(q, z) for z in range(0, 12)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_strictly_increasing_in_q(self):
        for z in (1, 3, 8):
            qs = [0.05, 0.1, 0.2, 0.3, 0.4, 0.45]
            values = [catch_up_probability(q, z) for q in qs]
            assert all(a < b for a, b in zip(values, values[1:]))

    def test_domain_errors(self):
        with pytest.raises(SecurityError):
            catch_up_probability(-0.1, 3)
        with pytest.raises(SecurityError):
            catch_up_probability(1.0, 3)
        with pytest.raises(SecurityError):
            catch_up_probability(0.3, -1)


class TestCascade:
    def test_five_level_example_is_exact(self):
        result = cascade_breach_probability(Fraction(1, 10), 5)
        assert result == Fraction(1, 100_000)

    def test_single_level_is_identity(self):
        for p in (0.0, 0.37, 1.0):
            assert cascade_breach_probability(p, 1) == p

    def test_three_levels_against_product_oracle(self):
        expected = 1.0
        for _ in range(3):
            expected *= 0.3  # brute-force product
        assert cascade_breach_probability(0.3, 3) == pytest.approx(expected)
        assert cascade_breach_probability(0.3, 3) == pytest.approx(0.027)

    def test_bounded_by_epsilon_power(self):
        eps = 0.15
        for p in (0.01, 0.1, 0.15):
            for n in (1, 2, 5, 9):
                assert cascade_breach_probability(p, n) <= eps**n + 1e-15

    def test_vanishing_limit(self):
        for p in (0.05, 0.2, 0.4, 0.49):
            n_star = math.ceil(-6 / math.log10(p))
            assert cascade_breach_probability(p, n_star) < 1e-6
            values = [cascade_breach_probability(p, n) for n in range(1, 25)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_domain_errors(self):
        with pytest.raises(SecurityError):
            cascade_breach_probability(0.5, 0)
        with pytest.raises(SecurityError):
            cascade_breach_probability(1.5, 3)


class TestRobustnessRatio:
    def test_robust_example(self):
        ratio = epsilon_robustness_ratio(0.001, 0.9)
        assert ratio == pytest.approx(0.001111, rel=1e-3)
        assert ratio < 0.01

    def test_zero_malicious(self):
        assert epsilon_robustness_ratio(0.0, 0.5) == 0.0

    def test_equal_probabilities(self):
        assert epsilon_robustness_ratio(0.5, 0.5) == 1.0

    def test_zero_acceptance_undefined(self):
        with pytest.raises(SecurityError):
            epsilon_robustness_ratio(0.1, 0.0)


class TestModelRobustness:
    def test_all_zero(self):
        assert model_robustness([0.0] * 10) == 0.0

    def test_constant(self):
        assert model_robustness([0.37] * 8) == pytest.approx(0.37)

    def test_cascade_means_against_bruteforce(self):
        p = 0.4
        for depth in range(1, 21):
            values = [cascade_breach_probability(p, n) for n in range(depth, depth + 20)]
            brute = sum(values) / len(values)  # independent mean
            assert model_robustness(values) == pytest.approx(brute)
        # deeper minimum cascade level, smaller average
        means = [
            model_robustness([cascade_breach_probability(p, n) for n in range(d, d + 20)])
            for d in range(1, 10)
        ]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_empty_rejected(self):
        with pytest.raises(SecurityError):
            model_robustness([])


class TestSimulateAttack:
    def test_zero_share_is_exactly_zero(self):
        result = simulate_attack(AttackParams(q=0.0, z=4, trials=50_000, seed=1))
        assert result.estimate == 0.0
        assert result.successes == 0
        assert result.truncated == 0

    def test_level_start_is_exactly_one(self):
        result = simulate_attack(AttackParams(q=0.3, z=0, trials=1_000, seed=1))
        assert result.estimate == 1.0

    def test_symmetric_walk_is_recurrent_within_truncation(self):
        result = simulate_attack(AttackParams(q=0.5, z=1, trials=40_000, seed=7))
        assert result.estimate + result.truncation_bound == pytest.approx(1.0, abs=1e-9)
        assert result.estimate > 0.97

    def test_agrees_with_closed_form_small_grid(self):
        trials = 200_000
        for q, z in ((0.1, 2), (0.2, 3), (0.3, 6), (0.4, 4)):
            result = simulate_attack(AttackParams(q=q, z=z, trials=trials, seed=42))
            target = catch_up_probability(q, z)
            sigma = max(result.stderr, math.sqrt(target * (1 - target) / trials))
            assert abs(result.estimate - target) <= 3 * sigma + result.truncation_bound, (
                q, z, result.estimate, target,
            )

    def test_same_seed_same_result(self):
        a = simulate_attack(AttackParams(q=0.3, z=4, trials=20_000, seed=5))
        b = simulate_attack(AttackParams(q=0.3, z=4, trials=20_000, seed=5))
        assert a == b

    def test_different_seed_differs(self):
        a = simulate_attack(AttackParams(q=0.3, z=4, trials=20_000, seed=5))
        b = simulate_attack(AttackParams(q=0.3, z=4, trials=20_000, seed=6))
        assert a.successes != b.successes

    def test_batch_equals_sequential_reference(self):
        """Per-trial counter seeding: the vectorized run must match scalar walks."""
        params = AttackParams(q=0.35, z=3, trials=400, seed=9, horizon=2_000)
        batch = simulate_attack(params)
        outcomes = [
            walk_single(params.seed, trial, params.q, params.z, params.horizon)
            for trial in range(params.trials)
        ]
        assert batch.successes == sum(o == "success" for o in outcomes)
        assert batch.truncated == sum(o == "truncated" for o in outcomes)

    def test_stderr_formula(self):
        result = simulate_attack(AttackParams(q=0.3, z=2, trials=10_000, seed=3))
        p_hat = result.successes / result.trials
        assert result.stderr == pytest.approx(math.sqrt(p_hat * (1 - p_hat) / result.trials))

    def test_param_validation(self):
        with pytest.raises(SecurityError):
            AttackParams(q=1.2, z=1)
        with pytest.raises(SecurityError):
            AttackParams(q=0.3, z=-1)
        with pytest.raises(SecurityError):
            AttackParams(q=0.3, z=1, trials=0)
        with pytest.raises(SecurityError):
            AttackParams(q=0.3, z=1, n=0)
        assert AttackParams(q=0.3, z=1).closed_form_valid
        assert not AttackParams(q=0.5, z=1).closed_form_valid


class TestAcceptanceProbability:
    def test_no_attacker_means_certain_acceptance(self):
        for i in (0, 1, 6):
            result = acceptance_probability_estimate(0.0, i, trials=10_000, seed=2)
            if i == 0:
                # degenerate boundary: a level race is already lost
                assert result.estimate == 0.0
            else:
                assert result.estimate == 1.0

    def test_complement_identity(self):
        race = simulate_attack(AttackParams(q=0.25, z=6, trials=50_000, seed=11))
        acceptance = acceptance_probability_estimate(0.25, 6, trials=50_000, seed=11)
        assert acceptance.estimate == pytest.approx(1.0 - race.estimate, abs=1e-12)
        assert acceptance.stderr == race.stderr

    def test_tracks_closed_form(self):
        result = acceptance_probability_estimate(0.25, 6, trials=200_000, seed=11)
        target = 1.0 - catch_up_probability(0.25, 6)
        sigma = max(result.stderr, 1e-4)
        assert abs(result.estimate - target) <= 3 * sigma + result.truncation_bound


class TestExactDecimal:
    @pytest.mark.parametrize(
        "frac,text",
        [
            (Fraction(1, 100_000), "0.00001"),
            (Fraction(1, 2), "0.5"),
            (Fraction(3, 1), "3"),
            (Fraction(0), "0"),
            (Fraction(27, 1000), "0.027"),
            (Fraction(1, 3), "1/3"),
            (Fraction(-1, 4), "-0.25"),
        ],
    )
    def test_rendering(self, frac, text):
        assert exact_decimal(frac) == text

    def test_round_trips_exactly(self):
        assert Fraction(exact_decimal(Fraction(1, 100_000))) == Fraction(1, 100_000)
