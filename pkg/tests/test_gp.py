import math

import numpy as np
import pytest

from prefbo.gp import (
    GammaPrior,
    HyperPriors,
    KernelHypers,
    default_priors,
    hyperprior_logpdf,
    kernel_blocks,
    kernel_matrix,
    matern52,
)
from prefbo.stats import chol_psd


def hypers(ls, os_):
    return KernelHypers(np.log(np.atleast_1d(ls)), math.log(os_))


class TestMatern52:
    def test_value_at_zero_distance(self):
        h = hypers([0.7, 1.3], 2.5)
        x = np.array([0.4, -1.0])
        assert matern52(x, x, h) == pytest.approx(2.5, abs=1e-14)

    def test_symmetry(self):
        h = hypers([0.7, 1.3], 2.5)
        x, y = np.array([0.1, 0.2]), np.array([-0.5, 1.8])
        assert matern52(x, y, h) == matern52(y, x, h)

    def test_unit_distance_value(self):
        import mpmath

        mpmath.mp.dps = 40
        r = mpmath.mpf(1)
        exact = float((1 + mpmath.sqrt(5) * r + 5 * r**2 / 3) * mpmath.exp(-mpmath.sqrt(5) * r))
        h = hypers([1.0], 1.0)
        got = matern52(np.array([0.0]), np.array([1.0]), h)
        assert got == pytest.approx(exact, rel=1e-14)
        assert got == pytest.approx(0.52399, abs=1e-5)

    def test_dimension_mismatch_rejected(self):
        h = hypers([1.0, 1.0], 1.0)
        with pytest.raises(ValueError):
            matern52(np.array([0.0]), np.array([0.0, 1.0]), h)

    def test_stationarity(self):
        h = hypers([0.6, 1.1, 0.9], 1.7)
        gen = np.random.default_rng(0)
        for _ in range(50):
            x, y, c = gen.standard_normal((3, 3))
            assert matern52(x + c, y + c, h) == pytest.approx(matern52(x, y, h), abs=1e-12)

    def test_monotone_decay(self):
        h = hypers([1.0], 1.0)
        ds = np.linspace(0.0, 5.0, 60)
        vals = [matern52(np.array([0.0]), np.array([d]), h) for d in ds]
        assert np.all(np.diff(vals) < 0)

    def test_ard_rescaling_invariance(self):
        gen = np.random.default_rng(1)
        X = gen.standard_normal((8, 2))
        Y = gen.standard_normal((8, 2))
        h = hypers([0.5, 2.0], 1.3)
        t = 3.7
        Xs, Ys = X.copy(), Y.copy()
        Xs[:, 1] *= t
        Ys[:, 1] *= t
        hs = hypers([0.5, 2.0 * t], 1.3)
        assert np.allclose(kernel_matrix(X, Y, h), kernel_matrix(Xs, Ys, hs), atol=1e-12)


class TestKernelMatrix:
    def test_single_point(self):
        h = hypers([1.0], 4.2)
        K = kernel_matrix(np.array([[0.3]]), np.array([[0.3]]), h)
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(4.2)

    def test_psd_with_base_jitter(self):
        gen = np.random.default_rng(2)
        X = gen.uniform(size=(50, 3))
        h = hypers([0.4, 0.4, 0.4], 1.0)
        K = kernel_matrix(X, X, h)
        L, c = chol_psd(K, 1e-8)
        assert c <= 1e-8

    def test_cross_transpose(self):
        gen = np.random.default_rng(3)
        X, Y = gen.uniform(size=(6, 2)), gen.uniform(size=(9, 2))
        h = hypers([0.7, 0.2], 1.0)
        assert np.allclose(kernel_matrix(X, Y, h), kernel_matrix(Y, X, h).T, atol=1e-15)

    def test_blocks_match_matrix(self):
        gen = np.random.default_rng(4)
        Q = gen.uniform(size=(5, 4, 2))
        h = hypers([0.5, 0.8], 1.9)
        blocks = kernel_blocks(Q, h)
        for b in range(5):
            assert np.allclose(blocks[b], kernel_matrix(Q[b], Q[b], h), atol=1e-14)


class TestHyperprior:
    def test_gamma_unit_at_one(self):
        priors = HyperPriors(GammaPrior(1.0, 1.0), GammaPrior(1.0, 1.0))
        h = KernelHypers([0.0], 0.0)  # every parameter equals 1
        # each of the two parameters contributes -1 (density) + 0 (Jacobian)
        assert hyperprior_logpdf(h, priors) == pytest.approx(-2.0, abs=1e-12)

    def test_transformed_mode_near_half(self):
        prior = GammaPrior(3.0, 6.0)
        us = np.linspace(-4.0, 2.0, 2001)
        dens = prior.logpdf(np.exp(us)) + us
        assert np.all(np.isfinite(dens))
        assert math.exp(us[int(np.argmax(dens))]) == pytest.approx(0.5, abs=5e-3)

    def test_density_vanishes_at_origin_for_shape_gt_one(self):
        prior = GammaPrior(3.0, 6.0)
        vals = prior.logpdf(np.array([1e-4, 1e-8, 1e-12]))
        assert np.all(np.diff(vals) < 0)
        assert vals[-1] < -40

    def test_default_priors_positive_params(self):
        priors = default_priors()
        assert priors.lengthscale.shape == 10.0 and priors.lengthscale.rate == 20.0
        assert priors.outputscale.shape == 2.0 and priors.outputscale.rate == 1.0
