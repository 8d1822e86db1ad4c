import math

import numpy as np
import pytest
from scipy.stats import chi2

from prefbo.acquisitions import OUTCOME_FIRST, OUTCOME_SECOND, DuelQuery
from prefbo.benchmarks import (
    OracleConfig,
    calibrate_sigma,
    elite_error_rate,
    _elite_pair_gaps,
    eval_fn,
    get_function,
    oracle_compare,
    registry_names,
)
from prefbo.stats import RandomSource, norm_cdf, sobol_sample


class TestRegistry:
    def test_names(self):
        assert registry_names() == [
            "ackley6",
            "alpine1_7",
            "branin2",
            "hartmann6",
            "levy2",
            "levy6",
            "quadratic2",
        ]

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            get_function("rosenbrock")


class TestEvalFn:
    def test_quadratic_max_at_origin(self):
        t = get_function("quadratic2")
        assert eval_fn(t, [0.0, 0.0]) == 0.0
        assert eval_fn(t, [0.5, -0.5]) == pytest.approx(-0.25)

    def test_ackley_zero_at_origin(self):
        t = get_function("ackley6")
        assert eval_fn(t, np.zeros(6)) == pytest.approx(0.0, abs=1e-12)

    def test_branin_known_max(self):
        t = get_function("branin2")
        assert t.known_max == pytest.approx(-0.397887, abs=1e-6)
        assert eval_fn(t, [math.pi, 2.275]) == pytest.approx(t.known_max, abs=1e-12)
        # cross-check: dense scan finds nothing better
        scan = t(sobol_sample(1_000_000, t.domain, RandomSource(0)))
        assert scan.max() <= t.known_max + 1e-9

    def test_hartmann_known_max(self):
        t = get_function("hartmann6")
        assert t.known_max == pytest.approx(3.32237, abs=1e-5)
        assert eval_fn(t, t.known_argmax) == pytest.approx(t.known_max, abs=1e-12)

    def test_alpine_levy_zero_at_optima(self):
        alp = get_function("alpine1_7")
        assert eval_fn(alp, np.zeros(7)) == 0.0
        for name in ("levy6", "levy2"):
            t = get_function(name)
            assert eval_fn(t, np.ones(t.dim)) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_domain_rejected(self):
        t = get_function("quadratic2")
        with pytest.raises(ValueError):
            eval_fn(t, [1.5, 0.0])

    def test_argmax_consistency_invariant(self):
        for name in registry_names():
            t = get_function(name)
            assert eval_fn(t, t.known_argmax) == pytest.approx(t.known_max, abs=1e-9)

    def test_sobol_scan_never_beats_known_max(self):
        for name in registry_names():
            t = get_function(name)
            vals = t(sobol_sample(1_000_000, t.domain, RandomSource(17)))
            assert vals.max() <= t.known_max + 1e-9


class TestCalibrateSigma:
    def test_monotone_error_in_sigma(self):
        t = get_function("quadratic2")
        gaps = _elite_pair_gaps(t, RandomSource(0))
        sigmas = np.logspace(-6, 2, 17)
        errs = [elite_error_rate(gaps, s) for s in sigmas]
        assert np.all(np.diff(errs) >= 0)

    def test_small_target_small_sigma(self):
        t = get_function("quadratic2")
        s_small = calibrate_sigma(t, 0.002, RandomSource(0))
        s_big = calibrate_sigma(t, 0.30, RandomSource(0))
        assert s_small < s_big / 50

    def test_target_validation(self):
        t = get_function("quadratic2")
        for bad in (0.0, 0.5, 0.7, -0.1):
            with pytest.raises(ValueError):
                calibrate_sigma(t, bad, RandomSource(0))

    def test_self_consistency_quadratic(self):
        t = get_function("quadratic2")
        sigma = calibrate_sigma(t, 0.10, RandomSource(5))
        # fresh elite pairs, fresh seed, empirical misordering rate
        gaps = _elite_pair_gaps(t, RandomSource(99))
        gen = RandomSource(100).generator
        draws = gen.uniform(size=gaps.size)
        err = float(np.mean(draws < norm_cdf(-gaps / sigma)))
        assert 0.09 <= err <= 0.11

    def test_reproducible_across_seeds_within_2pct(self):
        t = get_function("branin2")
        sigmas = [calibrate_sigma(t, 0.10, RandomSource(s)) for s in range(3)]
        spread = (max(sigmas) - min(sigmas)) / np.mean(sigmas)
        assert spread <= 0.04  # pairwise 2% relative


class TestOracleCompare:
    def test_deterministic_mode(self):
        t = get_function("quadratic2")
        cfg = OracleConfig(deterministic=True)
        rng = RandomSource(0)
        q = DuelQuery([0.1, 0.1], [0.8, 0.8])
        for _ in range(5):
            assert oracle_compare(t, cfg, q, rng) == OUTCOME_FIRST
            assert oracle_compare(t, cfg, q.swapped(), rng) == OUTCOME_SECOND

    def test_tie_goes_to_first(self):
        t = get_function("quadratic2")
        cfg = OracleConfig(deterministic=True)
        q = DuelQuery([0.5, 0.0], [-0.5, 0.0])
        assert oracle_compare(t, cfg, q, RandomSource(0)) == OUTCOME_FIRST

    def test_equal_points_fifty_fifty(self):
        t = get_function("quadratic2")
        cfg = OracleConfig(sigma_true=1.0)
        rng = RandomSource(1)
        q = DuelQuery([0.3, 0.4], [-0.3, -0.4])  # equal utility
        n = 100_000
        wins = sum(oracle_compare(t, cfg, q, rng) == OUTCOME_FIRST for _ in range(n))
        se = math.sqrt(0.25 / n)
        assert abs(wins / n - 0.5) <= 3 * se

    def test_unit_gap_frequency(self):
        t = get_function("quadratic2")
        cfg = OracleConfig(sigma_true=1.0)
        rng = RandomSource(2)
        # f gap of exactly 1: f(0,0)=0 vs f(x)=-1 at |x|^2=2
        q = DuelQuery([0.0, 0.0], [1.0, 1.0])
        n = 100_000
        wins = sum(oracle_compare(t, cfg, q, rng) == OUTCOME_FIRST for _ in range(n))
        p = norm_cdf(1.0)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(wins / n - p) <= 3 * se

    def test_outcome_distribution_chi_square(self):
        # binomial outcomes across a grid of utility gaps vs the probit law
        t = get_function("quadratic2")
        sigma = 0.7
        cfg = OracleConfig(sigma_true=sigma)
        rng = RandomSource(3)
        n = 20_000
        stat = 0.0
        gaps = [0.02, 0.1, 0.3, 0.6, 0.85, 1.0]
        for gap in gaps:
            r2 = 2 * gap
            a = min(1.0, math.sqrt(r2))
            b = math.sqrt(max(r2 - a * a, 0.0))
            q = DuelQuery([0.0, 0.0], [a, b])
            wins = sum(oracle_compare(t, cfg, q, rng) == OUTCOME_FIRST for _ in range(n))
            p = float(norm_cdf(gap / sigma))
            stat += (wins - n * p) ** 2 / (n * p * (1 - p))
        assert stat <= chi2.ppf(0.99, df=len(gaps))

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            OracleConfig(sigma_true=-1.0)
