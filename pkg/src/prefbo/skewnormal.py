"""Extended skew normal (ESN) distribution and Gaussian conditioning on a
nonnegativity event.

An ESN(xi, omega, alpha, tau) arises whenever a Gaussian variable is
conditioned on a correlated linear inequality; its mean has a closed form,
which is what makes the exact look-ahead step of the duel acquisition
computable without sampling. All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stats import mills_ratio, norm_logcdf

__all__ = [
    "EsnParams",
    "BivariateGaussian",
    "esn_pdf",
    "esn_cgf",
    "esn_mean",
    "condition_on_nonneg",
    "conditional_mean_given_nonneg",
]

# Relative floor on the conditional variance s22 - s21 s11^-1 s12: keeps the
# ESN shape parameter finite under (near-)perfect correlation. The mean
# formula itself has no singularity there, only the alpha parameterization.
_COND_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class EsnParams:
    """Location/scale/shape/extension parameters of an ESN distribution."""

    xi: float
    omega: float
    alpha: float
    tau: float

    def __post_init__(self):
        for name in ("xi", "omega", "alpha", "tau"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"EsnParams.{name} must be finite")
        if self.omega <= 0:
            raise ValueError("EsnParams.omega must be positive")


@dataclass(frozen=True)
class BivariateGaussian:
    """Means and covariance of a Gaussian pair (x1, x2)."""

    mu1: float
    mu2: float
    s11: float
    s22: float
    s12: float

    def __post_init__(self):
        if self.s11 <= 0 or self.s22 <= 0:
            raise ValueError("variances must be positive")
        if self.s12**2 > self.s11 * self.s22 * (1.0 + 1e-12):
            raise ValueError("covariance violates Cauchy-Schwarz")


def esn_pdf(x, p: EsnParams):
    """Density of ESN(xi, omega, alpha, tau) at ``x``.

    For very negative tau the Phi(tau) normalizer underflows in the direct
    quotient, so the density is assembled in the log domain throughout.
    """
    x = np.asarray(x, dtype=float)
    z = (x - p.xi) / p.omega
    arg = p.tau * np.sqrt(1.0 + p.alpha**2) + p.alpha * z
    log_pdf = (
        -np.log(p.omega)
        - norm_logcdf(p.tau)
        - 0.5 * z * z
        - 0.5 * np.log(2.0 * np.pi)
        + norm_logcdf(arg)
    )
    out = np.exp(log_pdf)
    return float(out) if out.ndim == 0 else out


def esn_cgf(t, p: EsnParams):
    """Cumulant generating function of the ESN at ``t``; K(0) = 0 exactly."""
    t = np.asarray(t, dtype=float)
    shift = p.alpha * p.omega / np.sqrt(1.0 + p.alpha**2) * t
    out = (
        p.xi * t
        + 0.5 * p.omega**2 * t * t
        + norm_logcdf(p.tau + shift)
        - norm_logcdf(p.tau)
    )
    return float(out) if out.ndim == 0 else out


def esn_mean(p: EsnParams):
    """Mean of the ESN: xi + (phi(tau)/Phi(tau)) * alpha*omega/sqrt(1+alpha^2)."""
    return p.xi + mills_ratio(p.tau) * p.alpha * p.omega / np.sqrt(1.0 + p.alpha**2)


def conditional_mean_given_nonneg(mu1, mu2, s22, s12):
    """E[x1 | x2 >= 0] for jointly Gaussian (x1, x2); broadcasts over arrays.

    Equals mu1 + (phi(tau)/Phi(tau)) * s12/sqrt(s22) with tau = mu2/sqrt(s22).
    This is the direct closed form; it stays finite for any admissible
    covariance, including perfectly correlated pairs.
    """
    mu1 = np.asarray(mu1, dtype=float)
    root_s22 = np.sqrt(s22)
    tau = np.asarray(mu2 / root_s22, dtype=float)
    out = mu1 + mills_ratio(tau) * s12 / root_s22
    return float(out) if out.ndim == 0 else out


def condition_on_nonneg(b: BivariateGaussian) -> tuple[EsnParams, float]:
    """Distribution and mean of x1 given the event x2 >= 0.

    Returns the ESN parameterization of the conditional law alongside its
    mean. The mean is computed from the direct closed form; the ESN carries
    the full distribution for callers needing more than the first moment.
    """
    cond_var = b.s22 - b.s12 * b.s12 / b.s11
    cond_var = max(cond_var, _COND_VAR_FLOOR * b.s22)
    root_s11 = np.sqrt(b.s11)
    esn = EsnParams(
        xi=b.mu1,
        omega=float(root_s11),
        alpha=float(b.s12 / root_s11 / np.sqrt(cond_var)),
        tau=float(b.mu2 / np.sqrt(b.s22)),
    )
    mean = conditional_mean_given_nonneg(b.mu1, b.mu2, b.s22, b.s12)
    return esn, float(mean)
