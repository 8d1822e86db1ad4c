"""Shared numeric primitives: normal special functions, a stable Mills ratio,
positive-definite factorization with jitter escalation, low-discrepancy
sampling, adaptive quadrature, and a splittable random source.

Everything here is pure given its inputs. Vectorized variants (``norm_pdf``,
``norm_cdf``, ``norm_logcdf``, ``mills_ratio``) accept arrays; ``normal_funcs``
is the scalar bundle used where a single z is inspected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special
from scipy.stats import qmc as _qmc

__all__ = [
    "BoxDomain",
    "RandomSource",
    "NormalFuncs",
    "normal_funcs",
    "norm_pdf",
    "norm_cdf",
    "norm_logcdf",
    "mills_ratio",
    "sobol_sample",
    "chol_psd",
    "integrate_1d",
    "FactorizationError",
    "QuadratureError",
]

_LOG_2PI = math.log(2.0 * math.pi)

# Mills ratio switches to the log-domain route below this z; the direct
# phi/Phi quotient loses accuracy once Phi underflows toward 0.
_MILLS_ASYMPTOTIC_Z = -6.0

SOBOL_MAX_DIM = 32


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even after the full jitter escalation ladder."""

    def __init__(self, message: str, attempted_jitter: float):
        super().__init__(message)
        self.attempted_jitter = attempted_jitter


class QuadratureError(ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box of admissible inputs."""

    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.ndim != 1 or upper.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if lower.size == 0:
            raise ValueError("domain must have at least one dimension")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("domain bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("each lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, atol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.width

    def tile(self, copies: int) -> "BoxDomain":
        """Product domain: the same box repeated ``copies`` times."""
        return BoxDomain(np.tile(self.lower, copies), np.tile(self.upper, copies))


@dataclass
class RandomSource:
    """Seedable, splittable random stream.

    The contract is reproducibility: the same ``seed`` (and split path)
    always yields the same draw sequence. Splitting derives independent
    child streams addressable by integer keys, so concurrent consumers
    never share state.
    """

    seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys: int) -> "RandomSource":
        return RandomSource(self.seed, self.path + tuple(int(k) for k in keys))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)


class NormalFuncs(NamedTuple):
    pdf: float
    cdf: float
    log_cdf: float
    mills: float


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z - 0.5 * _LOG_2PI)


def norm_cdf(z):
    return _special.ndtr(z)


def norm_logcdf(z):
    return _special.log_ndtr(z)


def mills_ratio(z):
    """phi(z)/Phi(z), stable over the whole real line.

    Direct quotient where the CDF is healthy; below ``_MILLS_ASYMPTOTIC_Z``
    the quotient is formed in the log domain, where log_ndtr's asymptotic
    tail expansion keeps full relative accuracy.
    """
    z = np.asarray(z, dtype=float)
    log_route = z <= _MILLS_ASYMPTOTIC_Z
    log_phi = -0.5 * z * z - 0.5 * _LOG_2PI
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.exp(log_phi) / _special.ndtr(z)
    out = np.where(log_route, np.exp(log_phi - _special.log_ndtr(z)), direct)
    if out.ndim == 0:
        return float(out)
    return out


def normal_funcs(z: float) -> NormalFuncs:
    """pdf, cdf, log-cdf and Mills ratio of the standard normal at ``z``."""
    if not math.isfinite(z):
        raise ValueError(f"normal_funcs requires finite z, got {z!r}")
    return NormalFuncs(
        pdf=float(norm_pdf(z)),
        cdf=float(norm_cdf(z)),
        log_cdf=float(norm_logcdf(z)),
        mills=float(mills_ratio(z)),
    )


def sobol_sample(n: int, domain: BoxDomain, rng: RandomSource) -> np.ndarray:
    """``n`` scrambled Sobol points inside ``domain``, deterministic per seed.

    Dimensions above ``SOBOL_MAX_DIM`` are rejected; the cap covers the
    largest product domain the acquisition optimizer builds (4 copies of a
    7-dimensional box).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = domain.dim
    if d > SOBOL_MAX_DIM:
        raise ValueError(f"sobol_sample supports at most {SOBOL_MAX_DIM} dimensions, got {d}")
    engine = _qmc.Sobol(d, scramble=True, seed=rng.child(0).generator)
    with warnings.catch_warnings():
        # n need not be a power of two; the balance warning is expected.
        warnings.simplefilter("ignore", UserWarning)
        u = engine.random(n)
    return domain.denormalize(u)


def chol_psd(A: np.ndarray, jitter: float = 1e-8) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A + c*I`` for the smallest workable jitter.

    ``c`` is taken from the ladder {0, jitter, 10*jitter, ..., 1e6*jitter};
    the factor and the jitter actually used are both returned so callers can
    stay consistent with the effectively factorized matrix.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be a square matrix")
    if not np.allclose(A, A.T, atol=1e-8 * (1.0 + np.abs(A).max(initial=0.0))):
        raise ValueError("A must be symmetric")
    n = A.shape[0]
    eye = np.eye(n)
    ladder = [0.0] + [jitter * 10.0**k for k in range(7)]
    last = ladder[-1]
    for c in ladder:
        try:
            L = np.linalg.cholesky(A + c * eye)
            return L, c
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"Cholesky failed for {n}x{n} matrix after escalating jitter to {last:g}",
        attempted_jitter=last,
    )


def integrate_1d(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Adaptive estimate of the integral of ``f`` over [lo, hi].

    The interval is pre-split into panels so narrow features far from the
    endpoints cannot be missed by the global rule, then each panel runs
    adaptive quadrature. Raises :class:`QuadratureError` when the summed
    error estimate exceeds ``tol``.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integration bounds must be finite")
    if hi <= lo:
        raise ValueError("hi must exceed lo")
    n_panels = 16
    edges = np.linspace(lo, hi, n_panels + 1)
    total = 0.0
    err_total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = _integrate.quad(f, a, b, epsabs=tol / n_panels, epsrel=1e-12, limit=200)
        total += val
        err_total += err
    if err_total > max(tol, 1e-15 * abs(total)) * 10.0:
        raise QuadratureError(
            f"quadrature error estimate {err_total:g} exceeds tolerance {tol:g}"
        )
    return total
