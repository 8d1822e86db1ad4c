"""Acquisition functions over a fitted preference posterior.

The centerpiece is the exact knowledge gradient for a duel: the posterior
mean after hypothetically observing a comparison outcome has a closed form
(conditioning a Gaussian on a noisy sign event yields an extended skew
normal), so the value of a duel is a probability-weighted average of two
analytic look-ahead means, maximized jointly with two fantasy optimizers.

Baselines: expected utility of the better option (EUBO), a smoothed batch
log expected improvement, and Sobol random pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .laplace import LaplacePosterior
from .optim import maximize_with_restarts
from .skewnormal import BivariateGaussian, condition_on_nonneg, conditional_mean_given_nonneg
from .stats import BoxDomain, RandomSource, norm_cdf, norm_pdf, sobol_sample

__all__ = [
    "DuelQuery",
    "DuelStats",
    "AcqOptions",
    "OUTCOME_FIRST",
    "OUTCOME_SECOND",
    "duel_stats",
    "duel_probability",
    "lookahead_mean",
    "kg_oneshot",
    "eubo",
    "qlogei",
    "draw_base_samples",
    "next_duel",
    "argmax_posterior_mean",
]

# Comparison outcomes: the first point wins, or the second does.
OUTCOME_FIRST = 1
OUTCOME_SECOND = 2

METHODS = ("kg", "eubo", "logei", "random")

# Variance floor for the conditioned variable; keeps the bivariate
# parameterization valid when a query lands on a zero-variance point.
_VAR_FLOOR = 1e-15


@dataclass(frozen=True)
class DuelQuery:
    """A pair of candidate inputs presented for comparison."""

    x1: np.ndarray
    x2: np.ndarray

    def __init__(self, x1, x2):
        object.__setattr__(self, "x1", np.asarray(x1, dtype=float))
        object.__setattr__(self, "x2", np.asarray(x2, dtype=float))

    def swapped(self) -> "DuelQuery":
        return DuelQuery(self.x2, self.x1)


@dataclass(frozen=True)
class DuelStats:
    """Posterior statistics of the utility gap D = f(x1) - f(x2)."""

    mean_delta: float
    var_delta: float
    cov_x_delta: float


@dataclass(frozen=True)
class AcqOptions:
    """Knobs for acquisition evaluation and optimization."""

    lookahead_sigma: float = 1.0
    n_raw: int = 1024
    n_starts: int = 8
    max_evals: int = 300
    simplex_rel: float = 0.05
    logei_samples: int = 128
    logei_temp: float = 1e-3


def duel_stats(posterior: LaplacePosterior, x, q: DuelQuery) -> DuelStats:
    """Gap statistics of q plus the covariance with f at probe point x."""
    mean, cov = posterior.predict_joint(np.vstack([x, q.x1, q.x2]))
    return DuelStats(
        mean_delta=float(mean[1] - mean[2]),
        var_delta=float(max(cov[1, 1] + cov[2, 2] - 2.0 * cov[1, 2], 0.0)),
        cov_x_delta=float(cov[0, 1] - cov[0, 2]),
    )


def duel_probability(
    posterior: LaplacePosterior, q: DuelQuery, lookahead_sigma: float = 1.0
) -> float:
    """Predictive probability that x1 wins the duel."""
    mean, cov = posterior.predict_joint(np.vstack([q.x1, q.x2]))
    mean_delta = float(mean[0] - mean[1])
    var_delta = float(max(cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1], 0.0))
    return float(norm_cdf(mean_delta / np.sqrt(var_delta + lookahead_sigma**2)))


def lookahead_mean(
    posterior: LaplacePosterior,
    x,
    q: DuelQuery,
    outcome: int,
    lookahead_sigma: float = 1.0,
) -> float:
    """Posterior mean of f(x) after hypothetically observing the duel outcome.

    Observing "x1 wins" is the event D + eps >= 0 with eps a unit normal, so
    the look-ahead law of f(x) is the Gaussian pair (f(x), D + eps)
    conditioned on nonnegativity of its second coordinate.
    """
    mean, cov = posterior.predict_joint(np.vstack([x, q.x1, q.x2]))
    mu_x = float(mean[0])
    var_x = float(max(cov[0, 0], _VAR_FLOOR))
    mean_delta = float(mean[1] - mean[2])
    var_delta = float(max(cov[1, 1] + cov[2, 2] - 2.0 * cov[1, 2], 0.0))
    cov_x_delta = float(cov[0, 1] - cov[0, 2])
    if outcome == OUTCOME_SECOND:
        mean_delta = -mean_delta
        cov_x_delta = -cov_x_delta
    elif outcome != OUTCOME_FIRST:
        raise ValueError(f"unknown outcome {outcome!r}")
    pair = BivariateGaussian(
        mu1=mu_x,
        mu2=mean_delta,
        s11=var_x,
        s22=var_delta + lookahead_sigma**2,
        s12=cov_x_delta,
    )
    _, mean_after = condition_on_nonneg(pair)
    return mean_after


def _kg_values(
    posterior: LaplacePosterior,
    X1: np.ndarray,
    X2: np.ndarray,
    XP: np.ndarray,
    XM: np.ndarray,
    lookahead_sigma: float,
) -> np.ndarray:
    """Batched one-shot duel values for quadruples (x1, x2, x_plus, x_minus)."""
    Q = np.stack([XP, XM, X1, X2], axis=1)
    means, covs = posterior.predict_blocks(Q)
    mean_delta = means[:, 2] - means[:, 3]
    var_delta = np.maximum(covs[:, 2, 2] + covs[:, 3, 3] - 2.0 * covs[:, 2, 3], 0.0)
    s22 = var_delta + lookahead_sigma**2
    tau = mean_delta / np.sqrt(s22)
    p_first = norm_cdf(tau)
    p_second = norm_cdf(-tau)
    cov_p = covs[:, 0, 2] - covs[:, 0, 3]
    cov_m = covs[:, 1, 2] - covs[:, 1, 3]
    mean_if_first = conditional_mean_given_nonneg(means[:, 0], mean_delta, s22, cov_p)
    mean_if_second = conditional_mean_given_nonneg(means[:, 1], -mean_delta, s22, -cov_m)
    return p_first * mean_if_first + p_second * mean_if_second


def kg_oneshot(
    posterior: LaplacePosterior,
    x1,
    x2,
    xplus,
    xminus,
    lookahead_sigma: float = 1.0,
) -> float:
    """One-shot knowledge gradient value of a duel with fixed fantasy points.

    Probability-weighted average of the two look-ahead means; the constant
    baseline max of the current mean is omitted since it does not depend on
    the duel.
    """
    vals = _kg_values(
        posterior,
        np.atleast_2d(np.asarray(x1, dtype=float)),
        np.atleast_2d(np.asarray(x2, dtype=float)),
        np.atleast_2d(np.asarray(xplus, dtype=float)),
        np.atleast_2d(np.asarray(xminus, dtype=float)),
        lookahead_sigma,
    )
    return float(vals[0])


def _eubo_values(posterior: LaplacePosterior, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    Q = np.stack([X1, X2], axis=1)
    means, covs = posterior.predict_blocks(Q)
    mu1, mu2 = means[:, 0], means[:, 1]
    theta2 = np.maximum(covs[:, 0, 0] + covs[:, 1, 1] - 2.0 * covs[:, 0, 1], 0.0)
    theta = np.sqrt(theta2)
    delta = mu1 - mu2
    degenerate = theta < 1e-12
    safe_theta = np.where(degenerate, 1.0, theta)
    zeta = delta / safe_theta
    smooth = mu1 * norm_cdf(zeta) + mu2 * norm_cdf(-zeta) + safe_theta * norm_pdf(zeta)
    return np.where(degenerate, np.maximum(mu1, mu2), smooth)


def eubo(posterior: LaplacePosterior, q: DuelQuery) -> float:
    """Expected utility of the better option: E[max(f(x1), f(x2))]."""
    return float(
        _eubo_values(
            posterior,
            np.atleast_2d(q.x1),
            np.atleast_2d(q.x2),
        )[0]
    )


def draw_base_samples(rng: RandomSource, n_samples: int = 128) -> np.ndarray:
    """Fixed standard-normal base samples for the smoothed improvement
    estimator, generated as inverse-CDF scrambled Sobol for low variance."""
    engine = qmc.Sobol(2, scramble=True, seed=rng.child(0).generator)
    u = engine.random(n_samples)
    # keep away from 0/1 so the inverse CDF stays finite
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return ndtri(u)


_LOG_FLOOR = np.log(1e-300)


def _logei_values(
    posterior: LaplacePosterior,
    X1: np.ndarray,
    X2: np.ndarray,
    incumbent: float,
    base_samples: np.ndarray,
    temp: float,
) -> np.ndarray:
    Q = np.stack([X1, X2], axis=1)
    means, covs = posterior.predict_blocks(Q)
    # analytic 2x2 Cholesky, tolerant of degenerate pairs
    a = np.sqrt(np.maximum(covs[:, 0, 0], 0.0))
    safe_a = np.where(a > 0.0, a, 1.0)
    b = np.where(a > 0.0, covs[:, 1, 0] / safe_a, 0.0)
    c = np.sqrt(np.maximum(covs[:, 1, 1] - b * b, 0.0))
    z1, z2 = base_samples[:, 0], base_samples[:, 1]
    f1 = means[:, None, 0] + a[:, None] * z1[None, :]
    f2 = means[:, None, 1] + b[:, None] * z1[None, :] + c[:, None] * z2[None, :]
    best = np.maximum(f1, f2) - incumbent
    improvement = np.logaddexp(0.0, best / temp) * temp
    mean_imp = improvement.mean(axis=1)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(mean_imp), _LOG_FLOOR)


def qlogei(
    posterior: LaplacePosterior,
    q: DuelQuery,
    incumbent: float,
    base_samples: np.ndarray,
    temp: float = 1e-3,
) -> float:
    """Smoothed log expected improvement of the pair over the incumbent.

    Sample-average estimator on fixed base samples; the softplus smoothing
    keeps the landscape differentiable-in-spirit for the simplex search.
    """
    return float(
        _logei_values(
            posterior,
            np.atleast_2d(q.x1),
            np.atleast_2d(q.x2),
            incumbent,
            base_samples,
            temp,
        )[0]
    )


def _mean_values(posterior: LaplacePosterior, X: np.ndarray) -> np.ndarray:
    return posterior.predict_mean(X)


def argmax_posterior_mean(
    posterior: LaplacePosterior,
    domain: BoxDomain,
    rng: RandomSource,
    opts: AcqOptions = AcqOptions(),
) -> np.ndarray:
    """Maximizer of the posterior mean over the domain (the current estimate
    of the most preferred input)."""
    x, _ = maximize_with_restarts(
        lambda X: _mean_values(posterior, X),
        domain,
        rng,
        n_raw=opts.n_raw,
        n_starts=opts.n_starts,
        max_evals=opts.max_evals,
        simplex_rel=opts.simplex_rel,
    )
    return x


def next_duel(
    posterior: LaplacePosterior | None,
    method: str,
    domain: BoxDomain,
    rng: RandomSource,
    opts: AcqOptions = AcqOptions(),
) -> DuelQuery:
    """Select the next comparison pair with the requested strategy.

    kg maximizes the one-shot duel value over (x1, x2, fantasies) jointly and
    discards the fantasies; eubo/logei maximize over pairs; random draws a
    Sobol pair. Deterministic given the random source.
    """
    if method not in METHODS:
        raise ValueError(f"unknown acquisition method {method!r}")
    d = domain.dim
    if method == "random":
        pts = sobol_sample(2, domain, rng.child(1))
        return DuelQuery(pts[0], pts[1])
    if posterior is None:
        raise ValueError(f"method {method!r} requires a fitted posterior")

    if method == "kg":
        prod = domain.tile(4)

        def value(X):
            return _kg_values(
                posterior,
                X[:, :d],
                X[:, d : 2 * d],
                X[:, 2 * d : 3 * d],
                X[:, 3 * d :],
                opts.lookahead_sigma,
            )

    elif method == "eubo":
        prod = domain.tile(2)

        def value(X):
            return _eubo_values(posterior, X[:, :d], X[:, d:])

    else:  # logei
        prod = domain.tile(2)
        if posterior.dataset.n_points:
            incumbent = float(posterior.predict_mean(posterior.dataset.points).max())
        else:
            incumbent = 0.0
        base = draw_base_samples(rng.child(2), opts.logei_samples)

        def value(X):
            return _logei_values(
                posterior, X[:, :d], X[:, d:], incumbent, base, opts.logei_temp
            )

    x, _ = maximize_with_restarts(
        value,
        prod,
        rng,
        n_raw=opts.n_raw,
        n_starts=opts.n_starts,
        max_evals=opts.max_evals,
        simplex_rel=opts.simplex_rel,
    )
    return DuelQuery(x[:d], x[d : 2 * d])
