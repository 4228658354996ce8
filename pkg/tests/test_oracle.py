"""Exact error oracle: type tables, probabilities, brute-force agreement."""
import math

import numpy as np
import pytest

from outlier_testing.detectors import (
    NULL,
    Coordinate,
    DetectorKind,
    HypothesisFamily,
)
from outlier_testing.errors import EnumerationCapError, ValidationError
from outlier_testing.oracle import (
    TypeClassTable,
    brute_force_error,
    enumerate_types,
    exact_error,
    exponent_fit,
    max_error,
    type_log_prob,
    type_log_prob_via_divergence,
)
from outlier_testing.simplex import Pmf, TypeVector

MU = Pmf(np.array([0.3, 0.7]))
PI = Pmf(np.array([0.7, 0.3]))
FAM3 = HypothesisFamily.single_outlier(3)


class TestTypeEnumeration:
    @pytest.mark.parametrize("n,k", [(3, 2), (5, 3), (10, 2), (4, 4)])
    def test_counts(self, n, k):
        table = enumerate_types(n, k)
        assert table.size == math.comb(n + k - 1, k - 1)
        assert np.all(table.counts.sum(axis=1) == n)

    def test_cap_enforced(self):
        with pytest.raises(EnumerationCapError):
            enumerate_types(100, 4, cap=1000)

    def test_multiplicities_sum_to_sequence_count(self):
        table = enumerate_types(6, 3)
        assert np.exp(table.log_multiplicity).sum() == pytest.approx(3**6, rel=1e-12)

    def test_normalization_random_laws(self):
        # sum of type-class probabilities is 1 for any generating law
        rng = np.random.default_rng(11)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 9))
            law = Pmf.normalize(rng.dirichlet(np.ones(k)) + 1e-6)
            table = enumerate_types(n, k)
            total = sum(
                math.exp(type_log_prob(TypeVector(c), law)) for c in table.counts
            )
            assert total == pytest.approx(1.0, abs=1e-9)


class TestTypeLogProb:
    def test_two_routes_agree(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 12))
            counts = rng.multinomial(n, np.ones(k) / k)
            if counts.sum() == 0:
                continue
            t = TypeVector(counts)
            law = Pmf.normalize(rng.dirichlet(np.ones(k)) + 1e-6)
            assert type_log_prob(t, law) == pytest.approx(
                type_log_prob_via_divergence(t, law), abs=1e-9
            )

    def test_hand_value(self):
        # P(type (1,1)) under p = (0.3, 0.7) is 2 * 0.3 * 0.7
        t = TypeVector(np.array([1, 1]))
        assert math.exp(type_log_prob(t, MU)) == pytest.approx(0.42, abs=1e-12)

    def test_support_violation(self):
        t = TypeVector(np.array([1, 1]))
        with pytest.raises(ValidationError):
            type_log_prob(t, Pmf(np.array([1.0, 0.0])))


class TestExactError:
    def test_matches_brute_force_single_kinds(self):
        for kind in (
            DetectorKind.ML_SINGLE,
            DetectorKind.TYP_SINGLE,
            DetectorKind.UNIV_SINGLE,
            DetectorKind.MU_ONLY,
        ):
            for n in (1, 2, 3):
                exact = exact_error(kind, FAM3, Coordinate(2), n, 2, MU, PI)
                brute = brute_force_error(kind, FAM3, Coordinate(2), n, 2, MU, PI)
                assert exact.prob == pytest.approx(brute, abs=1e-12), (kind, n)

    def test_matches_brute_force_null_aware(self):
        fam = HypothesisFamily.single_outlier(3, include_null=True)
        for truth in (NULL, Coordinate(1)):
            exact = exact_error(DetectorKind.NULL_SINGLE, fam, truth, 3, 2, MU, PI)
            brute = brute_force_error(DetectorKind.NULL_SINGLE, fam, truth, 3, 2, MU, PI)
            assert exact.prob == pytest.approx(brute, abs=1e-12)

    def test_degenerate_mu_equals_pi(self):
        # with identical laws the conditional correctness probabilities sum
        # to one across truths, so the worst case cannot beat guessing
        worst, _ = max_error(DetectorKind.UNIV_SINGLE, FAM3, 4, 2, PI, PI)
        assert worst.prob >= 1 - 1 / 3 - 1e-12

    def test_truth_outside_family_rejected(self):
        with pytest.raises(ValidationError):
            exact_error(DetectorKind.UNIV_SINGLE, FAM3, NULL, 2, 2, MU, PI)

    def test_tuple_cap(self):
        with pytest.raises(EnumerationCapError):
            exact_error(DetectorKind.UNIV_SINGLE, FAM3, Coordinate(1), 40, 2, MU, PI, cap=10**4)

    def test_error_decreases_with_n(self):
        errs = [
            exact_error(DetectorKind.ML_SINGLE, FAM3, Coordinate(1), n, 2, MU, PI).prob
            for n in (5, 10, 20, 40)
        ]
        assert all(a > b for a, b in zip(errs, errs[1:]))


class TestMaxError:
    def test_max_dominates_each(self):
        worst, per = max_error(DetectorKind.TYP_SINGLE, FAM3, 6, 2, MU, PI)
        assert all(worst.prob >= e.prob - 1e-15 for e in per.values())
        assert worst.prob == max(e.prob for e in per.values())

    def test_later_coordinates_lose_ties(self):
        # the earliest-index tie policy shifts tied mass toward low indices,
        # so conditional errors are ordered by truth index
        _, per = max_error(DetectorKind.ML_SINGLE, FAM3, 6, 2, MU, PI)
        probs = [per[Coordinate(i)].prob for i in (1, 2, 3)]
        assert probs[0] <= probs[1] <= probs[2]


class TestExponentFit:
    def test_pure_exponential(self):
        ns = np.arange(5, 45, 5)
        errs = np.exp(-0.2 * ns)
        assert exponent_fit(ns, errs).slope == pytest.approx(0.2, abs=1e-9)

    def test_polynomial_prefactor_absorbed(self):
        # n^3 is absorbed exactly by the ln(n) regressor; (n+1)^3 only up
        # to an O(1/n) bias on the slope
        ns = np.arange(10, 90, 10)
        errs = ns**3 * np.exp(-0.2 * ns)
        errs = errs / (errs.max() * 1.01)  # keep inside (0,1)
        assert exponent_fit(ns, errs).slope == pytest.approx(0.2, abs=1e-9)
        shifted = (ns + 1.0) ** 3 * np.exp(-0.2 * ns)
        shifted = shifted / (shifted.max() * 1.01)
        assert exponent_fit(ns, shifted).slope == pytest.approx(0.2, abs=1e-2)

    def test_rejects_degenerate(self):
        with pytest.raises(ValidationError):
            exponent_fit([1, 2, 3, 4], [0.5, 0.0, 0.1, 0.1])
        with pytest.raises(ValidationError):
            exponent_fit([1, 2, 3], [0.5, 0.4, 0.3])
