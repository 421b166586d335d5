import numpy as np
import pytest

import oracles
from conftest import random_counts, random_panel, random_population, two_period_population
from staggered_did.design import assignment_matrix, oracle_moments
from staggered_did.errors import DegenerateDesignError, InputError
from staggered_did.estimator import compute_weights, did_estimate
from staggered_did.numerics import RngStream
from staggered_did.panel import NEVER, AdoptionAssignment, Panel, PotentialOutcomeTable, all_dates
from staggered_did.variance import (
    bootstrap_b1,
    bootstrap_b2,
    collapse,
    confidence_interval,
    conservative_estimator,
    conservative_over_assignments,
    critical_value,
    exact_variance,
    lz_variance,
    lz_variance_full,
    s2_diff_population,
    s2_population,
    v2_population,
    variance_report,
    variance_upper_bound,
)


class TestPopulationMoments:
    def test_constant_outcomes_zero(self):
        pot = PotentialOutcomeTable(np.full((5, 2, 3), 4.0))
        w = compute_weights(2, [0.0, 0.6, 0.4])
        for a in all_dates(2):
            assert s2_population(pot, w, a) == 0.0

    def test_pair_identity(self, rng):
        pot = random_population(rng, 9, 3)
        w = compute_weights(3, [0.2, 0.3, 0.1, 0.4])
        dates = all_dates(3)
        for a in dates:
            for b in dates:
                lhs = s2_diff_population(pot, w, a, b) + v2_population(pot, w, a, b)
                rhs = 2 * (s2_population(pot, w, a) + s2_population(pot, w, b))
                assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_collapse_means_are_weighted_population_means(self, rng):
        pot = random_population(rng, 6, 3)
        w = compute_weights(3, [0.25, 0.25, 0.25, 0.25])
        c = collapse(pot, w)
        direct = (w.gamma * pot.Y.mean(axis=0)).sum(axis=0)
        np.testing.assert_allclose(c.means, direct, atol=1e-14)


class TestExactVariance:
    def test_matches_enumeration(self, rng):
        for _ in range(30):
            T = int(rng.integers(2, 4))
            N = int(rng.integers(3, 8))
            counts = random_counts(rng, N, T)
            pot = random_population(rng, N, T)
            _, var = oracle_moments(pot, counts)
            assert exact_variance(pot, counts) == pytest.approx(var, abs=1e-9)
            ref = oracles.enumerate_tau(pot.Y, np.repeat(np.arange(T + 1), counts))
            assert ref.var() == pytest.approx(var, abs=1e-9)

    def test_below_bound(self, rng):
        for _ in range(50):
            counts = random_counts(rng, 12, 3)
            pot = random_population(rng, 12, 3)
            assert exact_variance(pot, counts) <= variance_upper_bound(pot, counts) + 1e-12

    def test_additive_population_has_zero_variance(self, rng):
        N, T = 7, 3
        W = np.array([[1.0 if (k < T and k <= t) else 0.0 for k in range(T + 1)] for t in range(T)])
        Y = rng.standard_normal(N)[:, None, None] + rng.standard_normal(T)[None, :, None] + 2.0 * W
        assert exact_variance(PotentialOutcomeTable(Y), (2, 2, 1, 2)) == pytest.approx(0.0, abs=1e-12)

    def test_scaling(self, rng):
        pot = random_population(rng, 8, 3)
        counts = (2, 2, 2, 2)
        v = exact_variance(pot, counts)
        assert exact_variance(PotentialOutcomeTable(3.0 * pot.Y), counts) == pytest.approx(9.0 * v)

    def test_invalid_counts(self, rng):
        pot = random_population(rng, 4, 2)
        with pytest.raises(InputError):
            exact_variance(pot, (1, 1, 1))
        with pytest.raises(InputError):
            exact_variance(pot, (1, 1))


class TestConservative:
    def test_hand_example(self):
        # collapsed outcomes are gamma-weighted sums; with T=2, pi=(0,1/2,1/2) they are y2 - y1 (adopters)
        Y = np.array([[0.0, 1.0], [0.0, 3.0], [0.0, 0.0], [0.0, 2.0]])
        panel = Panel(Y, AdoptionAssignment.from_dates([2, 2, NEVER, NEVER], 2))
        assert conservative_estimator(panel) == pytest.approx(2.0 / 2 + 2.0 / 2)

    def test_expectation_dominates(self, rng):
        for _ in range(30):
            counts = random_counts(rng, 8, 2, min_size=2)
            pot = random_population(rng, 8, 2)
            w = compute_weights(2, counts / 8)
            vhat = conservative_over_assignments(pot, w, assignment_matrix(counts)).mean()
            assert vhat >= exact_variance(pot, counts) - 1e-12

    def test_batched_matches_single(self, rng):
        pot = random_population(rng, 7, 3)
        counts = (2, 0, 3, 2)
        w = compute_weights(3, np.array(counts) / 7)
        C = assignment_matrix(counts)
        batch = conservative_over_assignments(pot, w, C[:25])
        from staggered_did.panel import realize

        single = [conservative_estimator(realize(pot, AdoptionAssignment(c, 3)), w) for c in C[:25]]
        np.testing.assert_allclose(batch, single, atol=1e-12)

    def test_singleton_group(self):
        panel = Panel(np.zeros((3, 2)), AdoptionAssignment.from_dates([2, 2, NEVER], 2))
        with pytest.raises(DegenerateDesignError, match="date never has one unit"):
            conservative_estimator(panel)


class TestLiangZeger:
    def test_hand_example(self):
        Y = np.array([[0.0, 1.0], [0.0, 3.0], [0.0, 0.0]])
        panel = Panel(Y, AdoptionAssignment.from_dates([2, 2, NEVER], 2))
        assert did_estimate(panel) == pytest.approx(2.0)
        assert lz_variance(panel) == pytest.approx(0.5)
        assert lz_variance_full(panel) == pytest.approx(0.5)

    def test_forms_agree(self, rng):
        for _ in range(100):
            panel = random_panel(rng, int(rng.integers(4, 20)), 3)
            v = lz_variance(panel)
            assert lz_variance_full(panel) == pytest.approx(v, abs=1e-9)
            assert oracles.sandwich_tau(panel.Y, panel.W) == pytest.approx(v, abs=1e-9)

    def test_exact_fit_gives_zero(self, rng):
        panel = random_panel(rng, 10, 3)
        Y = rng.standard_normal(10)[:, None] + rng.standard_normal(3)[None, :] + 0.5 * panel.W
        assert lz_variance(panel.with_outcomes(Y)) == pytest.approx(0.0, abs=1e-20)


class TestBootstrap:
    def test_b2_zero_within_group_spread(self):
        Y = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        panel = Panel(Y, AdoptionAssignment.from_dates([2, 2, NEVER, NEVER], 2))
        assert bootstrap_b2(panel, 200, RngStream(0)) == 0.0

    def test_b2_keeps_group_sizes(self, rng):
        panel = random_panel(rng, 15, 3, counts=np.array([3, 4, 0, 8]))
        _, counts = bootstrap_b2(panel, 50, RngStream(1), return_counts=True)
        assert (counts == panel.counts).all()

    def test_b2_close_to_conservative(self, rng):
        panel = random_panel(rng, 60, 3, counts=np.array([15, 15, 15, 15]))
        v = conservative_estimator(panel)
        # resampling n units with replacement shrinks each group variance by (n-1)/n
        assert bootstrap_b2(panel, 20_000, RngStream(2)) == pytest.approx(v * 14 / 15, rel=0.05)

    def test_b1_reproducible_and_positive(self, rng):
        panel = random_panel(rng, 20, 3, counts=np.array([5, 5, 5, 5]))
        a = bootstrap_b1(panel, 300, RngStream(3))
        assert a == bootstrap_b1(panel, 300, RngStream(3))
        assert a > 0

    def test_b1_redraws_degenerate(self):
        # two units: most resamples pick one unit twice and lose exposure variation
        Y = np.array([[0.0, 1.0], [0.0, 2.0]])
        panel = Panel(Y, AdoptionAssignment.from_dates([2, NEVER], 2))
        assert bootstrap_b1(panel, 50, RngStream(4)) == pytest.approx(0.0, abs=1e-20)

    def test_b1_gives_up(self):
        Y = np.zeros((3, 2))
        panel = Panel(Y, AdoptionAssignment.from_dates([2, NEVER, NEVER], 2))
        with pytest.raises(DegenerateDesignError, match="bootstrap"):
            bootstrap_b1(panel, 500, RngStream(5), max_redraws=1)

    def test_reps_validation(self, rng):
        panel = random_panel(rng, 8, 2)
        with pytest.raises(InputError):
            bootstrap_b1(panel, 1)
        with pytest.raises(InputError):
            bootstrap_b2(panel, 0)


class TestIntervals:
    def test_unit_variance(self):
        lo, hi = confidence_interval(0.0, 1.0)
        assert (lo, hi) == (-1.96, 1.96)

    def test_shifted(self):
        lo, hi = confidence_interval(2.0, 4.0)
        assert lo == pytest.approx(-1.92) and hi == pytest.approx(5.92)

    def test_zero_variance(self):
        assert confidence_interval(1.5, 0.0) == (1.5, 1.5)

    def test_negative_variance(self):
        with pytest.raises(InputError):
            confidence_interval(0.0, -1e-3)

    def test_critical_values(self):
        assert critical_value(0.95) == 1.96
        assert critical_value(0.9) == pytest.approx(1.6448536, abs=1e-6)
        with pytest.raises(InputError):
            critical_value(1.2)


def test_neyman_special_case_conservative_is_classical(rng):
    pot = two_period_population(rng, 10)
    panel = Panel(pot.Y[np.arange(10), :, [1] * 5 + [2] * 5], AdoptionAssignment.from_dates([2] * 5 + [NEVER] * 5, 2))
    y_t, y_c = panel.Y[:5, 1], panel.Y[5:, 1]
    assert conservative_estimator(panel) == pytest.approx(y_t.var(ddof=1) / 5 + y_c.var(ddof=1) / 5)


def test_report(rng):
    panel = random_panel(rng, 20, 3, counts=np.array([5, 5, 5, 5]))
    rep = variance_report(panel, 100, RngStream(0))
    d = rep.to_dict()
    assert d["v_exact"] is None
    assert all(d[k] >= 0 for k in ("v_hat_did", "v_lz", "v_b1", "v_b2"))
