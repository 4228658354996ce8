"""Monte Carlo estimator: determinism, interval validity, oracle agreement."""
import numpy as np
import pytest
from scipy.stats import beta

from outlier_testing.detectors import (
    NULL,
    Coordinate,
    DetectorKind,
    HypothesisFamily,
)
from outlier_testing.errors import ValidationError
from outlier_testing.oracle import exact_error
from outlier_testing.sim import (
    SimConfig,
    clopper_pearson,
    estimate_error,
    estimate_max_error,
    exponent_sweep,
    generate,
    with_seed,
)
from outlier_testing.simplex import Pmf

MU = Pmf(np.array([0.3, 0.7]))
PI = Pmf(np.array([0.7, 0.3]))
FAM3 = HypothesisFamily.single_outlier(3)


def cfg3(**kw):
    base = dict(
        kind=DetectorKind.UNIV_SINGLE, family=FAM3, k=2,
        n_grid=(10, 20, 30, 40), trials=200, seed=0, mus=MU, pi=PI,
    )
    base.update(kw)
    return SimConfig(**base)


class TestSimConfig:
    def test_rejects_small_trial_budget(self):
        with pytest.raises(ValidationError):
            cfg3(trials=50)

    def test_rejects_empty_grid(self):
        with pytest.raises(ValidationError):
            cfg3(n_grid=())

    def test_rejects_partial_support_law(self):
        with pytest.raises(ValidationError):
            cfg3(pi=Pmf(np.array([1.0, 0.0])))


class TestClopperPearson:
    def test_rule_of_three(self):
        # zero errors: upper bound close to the ln(1/alpha2)/n rule
        lo, hi = clopper_pearson(0, 1000)
        assert lo == 0.0
        assert hi == pytest.approx(1 - 0.025 ** (1 / 1000), abs=1e-12)
        assert hi < 3.8 / 1000

    def test_all_errors(self):
        lo, hi = clopper_pearson(1000, 1000)
        assert hi == 1.0 and lo > 0.99

    def test_contains_point_estimate(self):
        for e, t in [(1, 100), (17, 200), (99, 100)]:
            lo, hi = clopper_pearson(e, t)
            assert lo <= e / t <= hi

    def test_nominal_coverage_on_synthetic_bernoulli(self):
        rng = np.random.default_rng(21)
        p, trials, reps = 0.07, 400, 300
        covered = 0
        for _ in range(reps):
            e = rng.binomial(trials, p)
            lo, hi = clopper_pearson(e, trials)
            covered += lo <= p <= hi
        # exact intervals are conservative: coverage >= 95% up to binomial noise
        assert covered / reps >= 0.93


class TestGenerate:
    def test_deterministic_given_seed(self):
        a = generate(Coordinate(2), MU, PI, m=3, n=50, k=2, seed=(7, 1, 50, 0))
        b = generate(Coordinate(2), MU, PI, m=3, n=50, k=2, seed=(7, 1, 50, 0))
        assert np.array_equal(a.data, b.data)

    def test_null_truth_uses_pi_everywhere(self):
        near_zero = Pmf(np.array([1 - 1e-10, 1e-10]))
        o = generate(NULL, MU, near_zero, m=3, n=200, k=2, seed=3)
        assert np.all(o.data == 0)

    def test_outlier_row_has_shifted_frequency(self):
        o = generate(Coordinate(1), MU, PI, m=3, n=4000, k=2, seed=5)
        freqs = o.data.mean(axis=1)  # mean symbol = P(symbol 1)
        assert abs(freqs[0] - 0.7) < 0.05
        assert abs(freqs[1] - 0.3) < 0.05 and abs(freqs[2] - 0.3) < 0.05


class TestEstimates:
    def test_bit_for_bit_determinism(self):
        cfg = cfg3()
        a = estimate_error(cfg, Coordinate(1), 20)
        b = estimate_error(cfg, Coordinate(1), 20)
        assert a == b

    def test_seed_changes_stream(self):
        cfg_a, cfg_b = cfg3(), with_seed(cfg3(), 1)
        a = generate(Coordinate(1), MU, PI, 3, 20, 2, (cfg_a.seed, 0, 20, 0))
        b = generate(Coordinate(1), MU, PI, 3, 20, 2, (cfg_b.seed, 0, 20, 0))
        assert not np.array_equal(a.data, b.data)

    def test_ci_brackets_estimate(self):
        est = estimate_error(cfg3(), Coordinate(2), 15)
        assert est.lo <= est.estimate <= est.hi

    def test_max_error_covers_family(self):
        per = estimate_max_error(cfg3(trials=100), 10)
        assert set(per) == set(FAM3.hypotheses)

    def test_oracle_agreement_randomized(self):
        # the 95% interval should cover the exact error in nearly all of
        # 100 randomized configurations
        rng = np.random.default_rng(33)
        covered = 0
        for i in range(100):
            mu = Pmf.normalize(rng.dirichlet(np.ones(2)) + 0.05)
            pi = Pmf.normalize(rng.dirichlet(np.ones(2)) + 0.05)
            n = int(rng.integers(4, 13))
            kinds = [DetectorKind.ML_SINGLE, DetectorKind.TYP_SINGLE,
                     DetectorKind.UNIV_SINGLE]
            kind = kinds[int(rng.integers(0, 3))]
            truth = Coordinate(int(rng.integers(1, 4)))
            cfg = cfg3(kind=kind, mus=mu, pi=pi, trials=100,
                       seed=1000 + i, n_grid=(n,))
            est = estimate_error(cfg, truth, n)
            exact = exact_error(kind, FAM3, truth, n, 2, mu, pi).prob
            covered += est.lo <= exact <= est.hi
        assert covered >= 93


class TestExponentSweep:
    def test_positive_slope_on_separated_pair(self):
        cfg = cfg3(n_grid=(10, 20, 30, 40, 50), trials=600)
        sweep = exponent_sweep(cfg, Coordinate(1))
        assert sweep.slope_lo > 0.0
        assert sweep.fit is not None and sweep.fit.slope > 0.0
        assert sweep.slope_lo <= sweep.fit.slope <= sweep.slope_hi

    def test_needs_four_points(self):
        with pytest.raises(ValidationError):
            exponent_sweep(cfg3(n_grid=(10, 20, 30)), Coordinate(1))

    def test_sweep_deterministic(self):
        cfg = cfg3(trials=100)
        a = exponent_sweep(cfg, Coordinate(3))
        b = exponent_sweep(cfg, Coordinate(3))
        assert a == b
