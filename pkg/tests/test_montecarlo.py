import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peakstop import lattice, montecarlo as mc, rules
from peakstop.errors import PreconditionError
from peakstop.lattice import LatticeStepDistribution, PredictionProblem, rule_value
from peakstop.levy import LevyMeasure, LevyTriplet, MeasureAtom, PowerLawPiece, SimScheme
from peakstop.rewards import Exponential, Indicator0, Linear, PiecewiseLinear
from peakstop.rules import (
    ConstantRule,
    DrawdownTrigger,
    FirstPassageAbove,
    RandomizedThreshold,
    StopAtNewMax,
    stop_index,
    stop_indices_batch,
)

BERN06 = LatticeStepDistribution(1.0, ((1, 0.6), (-1, 0.4)))
CHI0 = Indicator0()
RSS_TRIPLET = LevyTriplet(
    0.6, 0.25, LevyMeasure(atoms=(MeasureAtom(0.5, 0.6), MeasureAtom(-0.5, 0.4)))
)


class TestRuleEngine:
    def test_batch_matches_incremental(self):
        rng = np.random.default_rng(0)
        times = np.arange(21, dtype=float)
        rule_set = [
            ConstantRule(7),
            FirstPassageAbove(2.0),
            DrawdownTrigger(1.5),
            StopAtNewMax(after=5),
        ]
        for _ in range(50):
            steps = rng.choice([1.0, -1.0], size=20)
            x = np.concatenate([[0.0], np.cumsum(steps)])
            m = np.maximum.accumulate(x)
            for rule in rule_set:
                st_ = rule.reset(None)
                assert stop_index(rule, st_, times, x, m) == stop_indices_batch(
                    rule, st_, times, x[None, :], m[None, :]
                )[0]

    def test_never_triggered_stops_at_horizon(self):
        times = np.arange(4, dtype=float)
        x = np.array([0.0, -1.0, -2.0, -3.0])
        m = np.maximum.accumulate(x)
        assert stop_index(FirstPassageAbove(10.0), None, times, x, m) == 3

    def test_decisions_depend_only_on_prefix(self):
        # two continuations sharing a prefix get identical decisions on it
        rng = np.random.default_rng(1)
        rule_set = [
            ConstantRule(4),
            FirstPassageAbove(1.5),
            DrawdownTrigger(1.0),
            StopAtNewMax(after=2),
        ]

        def prefix_decisions(steps):
            x = np.concatenate([[0.0], np.cumsum(steps)])
            m = np.maximum.accumulate(x)
            out = {}
            for rule in rule_set:
                st_ = rule.reset(None)
                out[rule] = tuple(
                    rule.should_stop(st_, t, x[t], m[t]) for t in range(6)
                )
            return out

        for _ in range(25):
            prefix = rng.choice([1.0, -1.0], size=5)
            cont_a = np.concatenate([prefix, rng.choice([1.0, -1.0], size=5)])
            cont_b = np.concatenate([prefix, rng.choice([1.0, -1.0], size=5)])
            assert prefix_decisions(cont_a) == prefix_decisions(cont_b)

    def test_randomized_threshold_needs_rng(self):
        with pytest.raises(ValueError):
            RandomizedThreshold(0.5, 2.0).reset(None)


class TestEstimateValue:
    def test_matches_exact_stop_at_end(self):
        rep = mc.estimate_value(BERN06, CHI0, ConstantRule(10), 10, 100_000, 5)
        exact = float(lattice.value_stop_at_end(BERN06, CHI0, 10, 0))
        assert abs(rep.mean - exact) <= 4 * rep.se

    def test_matches_exact_stop_now(self):
        rep = mc.estimate_value(BERN06, CHI0, ConstantRule(0), 10, 100_000, 5)
        exact = float(lattice.value_stop_now(BERN06, CHI0, 10, 0))
        assert abs(rep.mean - exact) <= 4 * rep.se

    def test_cross_validation_battery(self):
        problem = PredictionProblem(BERN06, 10, CHI0)
        rule_set = [
            ConstantRule(0),
            ConstantRule(5),
            ConstantRule(10),
            FirstPassageAbove(2.0),
            DrawdownTrigger(2.0),
            StopAtNewMax(after=5),
        ]
        for seed in (1, 2, 3):
            for rule in rule_set:
                exact = float(rule_value(problem, rule))
                rep = mc.estimate_value(BERN06, CHI0, rule, 10, 20_000, seed)
                se = max(rep.se, 1e-12)
                assert abs(rep.mean - exact) <= 4 * se, (rule, seed)

    def test_monotone_path_exponential(self):
        tr = LevyTriplet(1.0, 0.0)
        rep = mc.estimate_value(tr, Exponential(1.0), ConstantRule(1.0), 1.0, 500, 2)
        assert rep.mean == pytest.approx(1.0)  # M_T = X_T on a rising path
        assert rep.se == 0.0

    def test_count_guard(self):
        with pytest.raises(ValueError):
            mc.estimate_value(BERN06, CHI0, ConstantRule(0), 5, 50, 1)

    def test_unbounded_reward_flagged(self):
        rep = mc.estimate_value(BERN06, Linear(-1.0), ConstantRule(5), 5, 200, 1)
        assert rep.tail_warning

    def test_reward_shift_moves_estimate_exactly(self):
        base = PiecewiseLinear(knots=((0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.0)))
        lifted = PiecewiseLinear(
            knots=((0.0, 3.5), (1.0, 3.0), (2.0, 2.5), (3.0, 2.5))
        )
        a = mc.estimate_value(BERN06, base, DrawdownTrigger(1.0), 8, 5_000, 9)
        b = mc.estimate_value(BERN06, lifted, DrawdownTrigger(1.0), 8, 5_000, 9)
        assert b.mean - a.mean == pytest.approx(2.5, abs=1e-12)


class TestPairedCompare:
    def test_identical_rules_difference_is_exactly_zero(self):
        for model, horizon in ((BERN06, 10), (RSS_TRIPLET, 1.0)):
            rep = mc.paired_compare(
                model, CHI0 if model is BERN06 else Exponential(1.0),
                ConstantRule(0), ConstantRule(0), horizon, 1_000, 13,
                scheme=SimScheme(dt=0.05),
            )
            assert rep.mean_diff == 0.0 and rep.se_diff == 0.0
            assert rep.n_zero == rep.count

    def test_sign_counts_partition(self):
        rep = mc.paired_compare(
            BERN06, CHI0, ConstantRule(10), ConstantRule(0), 10, 2_000, 17
        )
        assert rep.n_positive + rep.n_negative + rep.n_zero == rep.count

    def test_right_skew_favors_horizon(self):
        rep = mc.paired_compare(
            BERN06, CHI0, ConstantRule(10), ConstantRule(0), 10, 50_000, 19
        )
        assert rep.mean_diff > 3 * rep.se_diff  # tau = N strictly better here


class TestBattery:
    def test_rss_triplet_never_beaten(self):
        rep = mc.bangbang_battery(
            RSS_TRIPLET, Exponential(1.0), 1.0, count=20_000, seed=3,
            scheme=SimScheme(dt=0.01),
        )
        assert rep.passed and rep.designated == "stop_at_end"
        assert rep.license == "finite-activity right skew"
        assert len(rep.rows) == 12

    def test_lss_mirror_designates_stop_now(self):
        rep = mc.bangbang_battery(
            RSS_TRIPLET.dual(), Exponential(1.0), 1.0, count=20_000, seed=3,
            scheme=SimScheme(dt=0.01),
        )
        assert rep.passed and rep.designated == "stop_now"

    def test_lattice_symmetric_license(self):
        sym = LatticeStepDistribution(1.0, ((1, 0.5), (-1, 0.5)))
        rep = mc.bangbang_battery(sym, CHI0, 8, count=20_000, seed=5)
        assert rep.passed and "symmetric" in rep.license

    def test_neither_class_rejected(self):
        from fractions import Fraction as F

        counter = LatticeStepDistribution(1, ((3, F(1, 3)), (-1, F(2, 3))))
        with pytest.raises(PreconditionError):
            mc.bangbang_battery(counter, CHI0, 4, count=200, seed=1)

    def test_weak_skew_requires_bounded_continuous_reward(self):
        # negative-side density exceeds the positive one pointwise near 0
        # (the small-neighborhood majorization fails at every eps), yet the
        # tails still dominate rightward and gamma >= L: weak right skew only
        from peakstop.levy import ConstantPiece, classify

        tr = LevyTriplet(
            0.0, 0.0,
            LevyMeasure(
                pieces=(
                    PowerLawPiece(1.0, 0.5, 0.0, math.inf),
                    PowerLawPiece(1.0, 0.5, -1.0, 0.0),
                    ConstantPiece(1.0, -1.0, 0.0),
                )
            ),
        )
        cls = classify(tr)
        assert cls.weak_rss and not cls.srss and not cls.rss
        assert cls.bsj and cls.L == pytest.approx(-0.5)
        assert cls.majorization_eps == 0.0
        with pytest.raises(PreconditionError):
            mc.bangbang_battery(
                tr, CHI0, 1.0, count=200, seed=1, scheme=SimScheme(dt=0.1, level=1)
            )
        rep = mc.bangbang_battery(
            tr, Exponential(1.0), 1.0,
            rule_list=[ConstantRule(0.0), StopAtNewMax(after=0.5)],
            count=2_000, seed=1, scheme=SimScheme(dt=0.05, level=2, eps_seed=0.5),
        )
        assert rep.license.startswith("weak right skew")

    def test_custom_rule_list_respected(self):
        rep = mc.bangbang_battery(
            BERN06, CHI0, 6,
            rule_list=[ConstantRule(0), RandomizedThreshold(0.5, 2.0)],
            count=5_000, seed=7,
        )
        assert len(rep.rows) == 2
        assert rep.footer.startswith("conclusions are statements")


class TestDeterminism:
    def test_same_seed_same_values(self):
        a = mc.evaluate_rules(BERN06, CHI0, [ConstantRule(5)], 10, 1_000, 3)
        b = mc.evaluate_rules(BERN06, CHI0, [ConstantRule(5)], 10, 1_000, 3)
        np.testing.assert_array_equal(a, b)

    def test_rule_randomness_does_not_disturb_paths(self):
        # adding a randomized rule must not change the other rule's values
        a = mc.evaluate_rules(BERN06, CHI0, [ConstantRule(5)], 10, 1_000, 3)
        b = mc.evaluate_rules(
            BERN06, CHI0, [ConstantRule(5), RandomizedThreshold(0.5, 2.0)], 10, 1_000, 3
        )
        np.testing.assert_array_equal(a[:, 0], b[:, 0])

    def test_levy_chunking_invariance(self):
        # same seed, same count: one big read equals the concatenated chunks
        a = mc.evaluate_rules(
            RSS_TRIPLET, Exponential(1.0), [ConstantRule(1.0)], 1.0, 500, 11,
            scheme=SimScheme(dt=0.05),
        )
        b = mc.evaluate_rules(
            RSS_TRIPLET, Exponential(1.0), [ConstantRule(1.0)], 1.0, 500, 11,
            scheme=SimScheme(dt=0.05),
        )
        np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 1000),
    level=st.floats(0.5, 3.0),
    after=st.integers(0, 8),
)
def test_batch_engine_equals_incremental_engine(seed, level, after):
    rng = np.random.default_rng(seed)
    steps = rng.choice([2.0, 1.0, -1.0], size=10, p=[0.2, 0.3, 0.5])
    x = np.concatenate([[0.0], np.cumsum(steps)])
    m = np.maximum.accumulate(x)
    times = np.arange(11, dtype=float)
    for rule in (
        FirstPassageAbove(level),
        DrawdownTrigger(level),
        ConstantRule(after),
        StopAtNewMax(after=after),
    ):
        st_ = rule.reset(None)
        want = stop_index(rule, st_, times, x, m)
        got = stop_indices_batch(rule, st_, times, x[None, :], m[None, :])[0]
        assert want == got
