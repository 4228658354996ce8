"""Exponent formulas, the nonconvex pair programs, and KL-ball bounds."""
import numpy as np
import pytest

from outlier_testing.errors import ValidationError
from outlier_testing.exponents import (
    KlBallSpec,
    SolverOptions,
    exponent_both_known,
    exponent_multi_known,
    exponent_multi_typ_known,
    exponent_univ_multi,
    exponent_univ_single,
    grid_exponent_univ_single,
    min_over_kl_ball,
    thm_multi_lower_bound,
    thm_single_lower_bound,
    typical_floor_log,
)
from outlier_testing.simplex import (
    Pmf,
    bhattacharyya,
    chernoff_pair_product,
    geometric_midpoint,
    kl,
)

PAIRS = [
    (Pmf(np.array([0.3, 0.7])), Pmf(np.array([0.7, 0.3]))),
    (Pmf(np.array([0.35, 0.65])), Pmf(np.array([0.65, 0.35]))),
    (Pmf(np.array([0.4, 0.6])), Pmf(np.array([0.6, 0.4]))),
]
TWO_B = [0.17435338714477777, 0.0943106794712413, 0.040821994520255214]

FAST_OPTS = SolverOptions(restarts=4, penalty_rounds=5, max_pg_iters=200)


class TestClosedForms:
    def test_both_known_is_two_bhattacharyya(self):
        for (mu, pi), target in zip(PAIRS, TWO_B):
            res = exponent_both_known(mu, pi)
            assert res.value == pytest.approx(target, abs=1e-12)
            assert res.solver == "closed_form"

    def test_both_known_rejects_equal_laws(self):
        mu, _ = PAIRS[0]
        with pytest.raises(ValidationError):
            exponent_both_known(mu, mu)

    def test_multi_known_is_min_pairwise_product_chernoff(self):
        mus = [PAIRS[0][0], PAIRS[1][0], PAIRS[2][0]]
        pi = PAIRS[0][1]
        res = exponent_multi_known(mus, pi)
        pairs = [
            chernoff_pair_product(mus[i], mus[j], pi)
            for i in range(3)
            for j in range(3)
            if i != j
        ]
        assert res.value == pytest.approx(min(pairs), abs=1e-10)

    def test_multi_known_dominates_typ_known(self):
        mus = [PAIRS[0][0], PAIRS[1][0], PAIRS[2][0]]
        pi = PAIRS[0][1]
        assert (
            exponent_multi_known(mus, pi).value
            >= exponent_multi_typ_known(mus, pi).value - 1e-10
        )

    def test_multi_typ_known_is_min_two_b(self):
        mus = [p[0] for p in PAIRS]
        pi = PAIRS[0][1]
        res = exponent_multi_typ_known(mus, pi)
        expected = min(2 * bhattacharyya(m, pi) for m in mus)
        assert res.value == pytest.approx(expected, abs=1e-12)


class TestUnivSingle:
    def test_matches_grid_oracle(self):
        mu, pi = PAIRS[0]
        solver = exponent_univ_single(mu, pi, m=3, opts=FAST_OPTS)
        grid = grid_exponent_univ_single(mu, pi, steps=400)
        assert solver.value == pytest.approx(grid.value, abs=2e-3)
        assert solver.feasibility_gap <= 1e-8

    def test_capped_by_both_known(self):
        for (mu, pi), target in zip(PAIRS, TWO_B):
            res = exponent_univ_single(mu, pi, m=3, opts=FAST_OPTS)
            assert 0.0 < res.value <= target + 1e-10

    def test_fine_grid_cross_check(self):
        # an independent 1e-4-step sweep over the free binary coordinate
        # of the grid oracle's own minimizer landscape
        mu, pi = PAIRS[2]
        coarse = grid_exponent_univ_single(mu, pi, steps=200)
        fine = grid_exponent_univ_single(mu, pi, steps=1000)
        assert fine.value == pytest.approx(coarse.value, abs=5e-4)
        assert fine.value <= coarse.value + 1e-12


class TestUnivMulti:
    def test_positive_below_known_exponent(self):
        mu, pi = PAIRS[0]
        small = SolverOptions(restarts=1, penalty_rounds=4, max_pg_iters=120)
        res = exponent_univ_multi([mu] * 5, pi, t=2, opts=small)
        assert 0.0 < res.value <= exponent_multi_typ_known([mu] * 5, pi).value + 1e-9

    def test_t_range(self):
        mu, pi = PAIRS[0]
        with pytest.raises(ValidationError):
            exponent_univ_multi([mu] * 5, pi, t=1)


class TestKlBall:
    def test_radius_zero_returns_center_value(self):
        mu, pi = PAIRS[0]
        res = min_over_kl_ball(mu, KlBallSpec(pi, 0.0))
        assert res.value == pytest.approx(2 * bhattacharyya(mu, pi), abs=1e-12)

    def test_mu_inside_ball_gives_zero(self):
        mu, pi = PAIRS[0]
        res = min_over_kl_ball(mu, KlBallSpec(pi, kl(mu, pi) + 1e-6))
        assert res.value == pytest.approx(0.0, abs=1e-10)

    def test_mid_radius_against_grid(self):
        mu, pi = PAIRS[0]
        radius = 0.25 * kl(mu, pi)
        res = min_over_kl_ball(mu, KlBallSpec(pi, radius))
        xs = np.linspace(1e-9, 1 - 1e-9, 200001)
        grid = np.stack([xs, 1 - xs], axis=1)
        d = (grid * (np.log(grid) - np.log(pi.probs))).sum(axis=1)
        obj = -2 * np.log(np.sqrt(grid * mu.probs).sum(axis=1))
        target = obj[d <= radius].min()
        assert res.value == pytest.approx(target, abs=1e-6)
        assert 0.0 < res.value < 2 * bhattacharyya(mu, pi)

    def test_negative_radius_rejected(self):
        _, pi = PAIRS[0]
        with pytest.raises(ValidationError):
            KlBallSpec(pi, -0.1)

    def test_typical_floor_log(self):
        _, pi = PAIRS[0]
        assert typical_floor_log(pi) == pytest.approx(-np.log(0.3), abs=1e-12)


class TestLowerBounds:
    def test_nondecreasing_in_m(self):
        mu, pi = PAIRS[1]
        vals = [thm_single_lower_bound(mu, pi, m).value for m in range(3, 40)]
        diffs = np.diff(vals)
        assert np.all(diffs >= -1e-9)

    def test_sandwich_at_m3(self):
        for (mu, pi), target in zip(PAIRS, TWO_B):
            lower = thm_single_lower_bound(mu, pi, 3).value
            univ = exponent_univ_single(mu, pi, 3, opts=FAST_OPTS).value
            assert lower <= univ + 2e-3
            assert univ <= target + 1e-9

    def test_multi_bound_below_known_exponent(self):
        mu, pi = PAIRS[0]
        bound = thm_multi_lower_bound([mu] * 5, pi, t=2, m=5).value
        known = exponent_multi_known([mu] * 5, pi).value
        assert 0.0 <= bound <= known + 1e-9

    def test_multi_bound_grows_with_m(self):
        mu, pi = PAIRS[0]
        vals = [thm_multi_lower_bound([mu] * m, pi, t=2, m=m).value for m in (5, 8, 12, 20)]
        assert np.all(np.diff(vals) >= -1e-9)
