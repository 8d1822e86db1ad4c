import numpy as np
import pytest

from prefbo.gp import KernelHypers
from prefbo.laplace import PrefDataset, fit_map
from prefbo.stats import BoxDomain, RandomSource, sobol_sample


def simulate_dataset(truth, domain, n_duels, seed, sigma_true=0.0):
    """Duels among Sobol points judged by a ground-truth utility."""
    rng = RandomSource(seed)
    pts = sobol_sample(2 * n_duels, domain, rng.child(0))
    ds = PrefDataset.empty(domain)
    gen = rng.child(1).generator
    for k in range(n_duels):
        x1, x2 = pts[2 * k], pts[2 * k + 1]
        gap = truth(x1) - truth(x2)
        if sigma_true > 0:
            from prefbo.stats import norm_cdf

            first = gen.uniform() < norm_cdf(gap / sigma_true)
        else:
            first = gap >= 0
        w, l = (x1, x2) if first else (x2, x1)
        ds = ds.add_duel(w, l)
    return ds


@pytest.fixture(scope="session")
def posterior_1d():
    """Small 1-D posterior on [0, 1] fit to noiseless duels from a bumpy truth."""
    domain = BoxDomain([0.0], [1.0])
    truth = lambda x: float(np.sin(3 * x[0]) + 0.5 * x[0])
    ds = simulate_dataset(truth, domain, 12, seed=11)
    hypers = KernelHypers([np.log(0.3)], np.log(1.5))
    return fit_map(ds, hypers)


@pytest.fixture(scope="session")
def posterior_2d():
    """2-D posterior on [-1, 1]^2 fit to noiseless duels from a quadratic truth."""
    domain = BoxDomain([-1.0, -1.0], [1.0, 1.0])
    truth = lambda x: -float(x @ x)
    ds = simulate_dataset(truth, domain, 20, seed=5)
    hypers = KernelHypers(np.log([0.4, 0.4]), np.log(2.0))
    return fit_map(ds, hypers)


class StubPosterior:
    """Duck-typed posterior with a prescribed joint law, for formula-level
    acquisition tests."""

    def __init__(self, joint_fn, points=None):
        self._joint = joint_fn
        self.dataset = type("D", (), {"n_points": 0 if points is None else len(points), "points": points})()

    def predict_joint(self, Q):
        return self._joint(np.atleast_2d(Q))

    def predict_blocks(self, Q):
        Q = np.asarray(Q)
        means = []
        covs = []
        for block in Q:
            m, c = self._joint(block)
            means.append(m)
            covs.append(c)
        return np.array(means), np.array(covs)

    def predict_mean(self, Q):
        m, _ = self._joint(np.atleast_2d(Q))
        return m
