"""Laplace-approximate GP posterior for pairwise preference data under the
probit comparison likelihood.

The latent utilities at the observed points get a GP prior; each duel
contributes log Phi((f_winner - f_loser)/sigma). The posterior is summarized
by its mode and curvature, which is exact-scale-appropriate for the few
hundred points a desk-scale study produces.

The curvature term W (minus the likelihood Hessian) is a sum of duel outer
products and is always singular, so every solve goes through the factorized
form built from I + L^T W L with K = L L^T; nothing here ever inverts W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import optim
from .gp import HyperPriors, KernelHypers, default_hypers, hyperprior_logpdf, kernel_blocks, kernel_matrix
from .stats import BoxDomain, RandomSource, chol_psd, mills_ratio, norm_logcdf

__all__ = [
    "PrefDataset",
    "LaplacePosterior",
    "FitError",
    "loglik_terms",
    "fit_map",
    "predict_joint",
    "laplace_evidence",
    "fit_hypers",
]

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-9
GRAD_TOL = 1e-8
MAX_NEWTON_ITERS = 100
MAX_HALVINGS = 20

# Relative Cholesky jitter base, scaled by the mean kernel diagonal.
JITTER_REL = 1e-8


class FitError(RuntimeError):
    """MAP search failed to reach stationarity."""

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm


class PrefDataset:
    """Distinct input points plus duels given as (winner, loser) index pairs.

    Points are kept deduplicated: constructing with near-duplicate rows is an
    error, and :meth:`add_duel` reuses an existing point when a new location
    falls within the dedup tolerance.
    """

    def __init__(self, domain: BoxDomain, points, duels):
        self.domain = domain
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            points = np.empty((0, domain.dim))
        if points.ndim != 2 or points.shape[1] != domain.dim:
            raise ValueError("points must be an (n, d) array matching the domain")
        duels = np.asarray(duels, dtype=int)
        if duels.size == 0:
            duels = np.empty((0, 2), dtype=int)
        if duels.ndim != 2 or duels.shape[1] != 2:
            raise ValueError("duels must be an (m, 2) array of (winner, loser) indices")
        n = points.shape[0]
        if duels.size and (duels.min() < 0 or duels.max() >= n):
            raise ValueError("duel indices out of range")
        if np.any(duels[:, 0] == duels[:, 1]):
            raise ValueError("a duel needs two distinct points")
        for i in range(n):
            close = np.max(np.abs(points[i + 1 :] - points[i]), axis=1) < DEDUP_TOL
            if close.any():
                j = i + 1 + int(np.argmax(close))
                raise ValueError(f"points {i} and {j} coincide within {DEDUP_TOL}")
        self.points = points
        self.duels = duels

    @classmethod
    def empty(cls, domain: BoxDomain) -> "PrefDataset":
        return cls(domain, np.empty((0, domain.dim)), np.empty((0, 2), dtype=int))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_duels(self) -> int:
        return self.duels.shape[0]

    def _locate(self, x: np.ndarray, points: list[np.ndarray]) -> int:
        for i, p in enumerate(points):
            if np.max(np.abs(p - x)) < DEDUP_TOL:
                return i
        points.append(x)
        return len(points) - 1

    def add_duel(self, x_winner, x_loser) -> "PrefDataset":
        """New dataset with one more duel, deduplicating the two locations."""
        x_winner = np.asarray(x_winner, dtype=float)
        x_loser = np.asarray(x_loser, dtype=float)
        points = [p for p in self.points]
        w = self._locate(x_winner, points)
        l = self._locate(x_loser, points)
        if w == l:
            raise ValueError("winner and loser coincide within the dedup tolerance")
        duels = np.vstack([self.duels, [w, l]]) if self.n_duels else np.array([[w, l]])
        return PrefDataset(self.domain, np.vstack(points), duels)


def loglik_terms(f: np.ndarray, duels: np.ndarray, sigma_fit: float = 1.0):
    """Probit comparison log likelihood with gradient and Hessian.

    Each duel contributes log Phi(z) with z = (f_w - f_l)/sigma. The Hessian
    is minus a nonnegative combination of duel outer products, hence negative
    semidefinite, which keeps the MAP problem concave.
    """
    if sigma_fit <= 0:
        raise ValueError("sigma_fit must be positive")
    f = np.asarray(f, dtype=float)
    n = f.size
    duels = np.asarray(duels, dtype=int)
    if duels.size == 0:
        return 0.0, np.zeros(n), np.zeros((n, n))
    w, l = duels[:, 0], duels[:, 1]
    z = (f[w] - f[l]) / sigma_fit
    value = float(np.sum(norm_logcdf(z)))
    mr = mills_ratio(z)
    grad = np.zeros(n)
    np.add.at(grad, w, mr / sigma_fit)
    np.add.at(grad, l, -mr / sigma_fit)
    dk = mr * (z + mr)
    A = _duel_incidence(n, duels)
    hessian = -(A * dk) @ A.T / sigma_fit**2
    return value, grad, hessian


def _duel_incidence(n: int, duels: np.ndarray) -> np.ndarray:
    """(n, m) matrix whose k-th column is e_winner - e_loser of duel k."""
    m = duels.shape[0]
    A = np.zeros((n, m))
    A[duels[:, 0], np.arange(m)] = 1.0
    A[duels[:, 1], np.arange(m)] = -1.0
    return A


def _loglik_and_curvature(f, duels, sigma_fit, A):
    w, l = duels[:, 0], duels[:, 1]
    z = (f[w] - f[l]) / sigma_fit
    value = float(np.sum(norm_logcdf(z)))
    mr = mills_ratio(z)
    grad = A @ (mr / sigma_fit) if duels.size else np.zeros(f.size)
    dk = mr * (z + mr) / sigma_fit**2
    return value, grad, dk


@dataclass
class LaplacePosterior:
    """Fitted preference posterior, immutable once constructed.

    ``grad_at_map`` doubles as the weight vector of the predictive mean:
    mu(Q) = K(Q, X) @ grad_at_map. ``_smat`` applies the stabilized
    (K + W^-1)^-1 so predictive covariances never touch W^-1.
    """

    dataset: PrefDataset
    hypers: KernelHypers
    f_map: np.ndarray
    grad_at_map: np.ndarray
    sigma_fit: float
    loglik_value: float
    jitter: float
    _xn: np.ndarray = field(repr=False)
    _smat: np.ndarray = field(repr=False)
    _logdet_gain: float = field(repr=False)
    _quad_term: float = field(repr=False)

    def _norm(self, Q: np.ndarray) -> np.ndarray:
        return self.dataset.domain.normalize(Q)

    def predict_mean(self, Q) -> np.ndarray:
        """Posterior mean at query points (m, d) in domain units."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if self.dataset.n_points == 0:
            return np.zeros(Q.shape[0])
        V = kernel_matrix(self._norm(Q), self._xn, self.hypers)
        return V @ self.grad_at_map

    def predict_joint(self, Q):
        """Joint posterior mean vector and covariance matrix at query points."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.dataset.domain.dim:
            raise ValueError("query dimension does not match the dataset domain")
        Qn = self._norm(Q)
        prior = kernel_matrix(Qn, Qn, self.hypers)
        if self.dataset.n_points == 0:
            return np.zeros(Q.shape[0]), prior
        V = kernel_matrix(Qn, self._xn, self.hypers)
        mean = V @ self.grad_at_map
        cov = prior - V @ self._smat @ V.T
        cov = 0.5 * (cov + cov.T)
        d = np.diagonal(cov)
        if d.min(initial=0.0) < -1e-10:
            raise FloatingPointError(
                f"predictive variance fell below tolerance: {d.min():.3e}"
            )
        np.fill_diagonal(cov, np.maximum(d, 0.0))
        return mean, cov

    def predict_blocks(self, Q):
        """Batched means and within-block covariances for a (B, m, d) stack."""
        Q = np.asarray(Q, dtype=float)
        B, m, d = Q.shape
        Qn = self._norm(Q)
        prior = kernel_blocks(Qn, self.hypers)
        if self.dataset.n_points == 0:
            return np.zeros((B, m)), prior
        flat = Qn.reshape(B * m, d)
        V = kernel_matrix(flat, self._xn, self.hypers).reshape(B, m, -1)
        means = V @ self.grad_at_map
        covs = prior - np.einsum("bin,nk,bjk->bij", V, self._smat, V, optimize=True)
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        diag = np.arange(m)
        covs[:, diag, diag] = np.maximum(covs[:, diag, diag], 0.0)
        return means, covs


def fit_map(
    dataset: PrefDataset,
    hypers: KernelHypers,
    sigma_fit: float = 1.0,
    f0: np.ndarray | None = None,
    grad_tol: float = GRAD_TOL,
    psi_trace: list | None = None,
) -> LaplacePosterior:
    """Damped Newton ascent to the posterior mode of the latent utilities.

    The objective is log-likelihood minus the prior quadratic form; accepted
    steps never decrease it. Raises :class:`FitError` if stationarity is not
    reached within the iteration budget.
    """
    n = dataset.n_points
    xn = dataset.domain.normalize(dataset.points) if n else np.empty((0, dataset.domain.dim))
    if n == 0 or dataset.n_duels == 0:
        return LaplacePosterior(
            dataset=dataset,
            hypers=hypers,
            f_map=np.zeros(n),
            grad_at_map=np.zeros(n),
            sigma_fit=sigma_fit,
            loglik_value=0.0,
            jitter=0.0,
            _xn=xn,
            _smat=np.zeros((n, n)),
            _logdet_gain=0.0,
            _quad_term=0.0,
        )
    K = kernel_matrix(xn, xn, hypers)
    L, jit = chol_psd(K, JITTER_REL * float(np.mean(np.diag(K))))
    A = _duel_incidence(n, dataset.duels)
    duels = dataset.duels
    LtA = L.T @ A
    eye = np.eye(n)

    # Ascent runs in whitened coordinates f = L u, where the objective is
    # psi(u) = loglik(L u) - u.u/2 and its gradient L^T g - u is computable
    # to machine precision regardless of K's conditioning. The stationarity
    # certificate below is this whitened gradient, i.e. grad psi measured in
    # the K metric.
    def psi_at(u, f):
        val = float(np.sum(norm_logcdf((f[duels[:, 0]] - f[duels[:, 1]]) / sigma_fit)))
        return val - 0.5 * float(u @ u)

    if f0 is None:
        u = np.zeros(n)
    else:
        u = solve_triangular(L, np.asarray(f0, dtype=float), lower=True, check_finite=False)
    f = L @ u
    psi_f = psi_at(u, f)
    if psi_trace is not None:
        psi_trace.append(psi_f)
    converged = False
    grad_norm = np.inf
    for _ in range(MAX_NEWTON_ITERS):
        w, l = duels[:, 0], duels[:, 1]
        z = (f[w] - f[l]) / sigma_fit
        mr = mills_ratio(z)
        resid = LtA @ (mr / sigma_fit) - u
        grad_norm = float(np.max(np.abs(resid)))
        if grad_norm <= grad_tol:
            converged = True
            break
        dk = mr * (z + mr) / sigma_fit**2
        M = eye + (LtA * dk) @ LtA.T
        R = np.linalg.cholesky(M)
        du = cho_solve((R, True), resid, check_finite=False)
        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            cand_u = u + step * du
            cand_f = L @ cand_u
            psi_c = psi_at(cand_u, cand_f)
            if psi_c >= psi_f:
                u, f, psi_f = cand_u, cand_f, psi_c
                if psi_trace is not None:
                    psi_trace.append(psi_f)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no float64-representable improvement left
            converged = grad_norm <= 1e-6
            break
    if not converged and grad_norm > grad_tol:
        raise FitError(
            f"Newton did not reach stationarity in {MAX_NEWTON_ITERS} iterations "
            f"(whitened grad norm {grad_norm:.3e})",
            grad_norm=grad_norm,
        )
    loglik_value, grad, dk = _loglik_and_curvature(f, duels, sigma_fit, A)
    M = eye + (LtA * dk) @ LtA.T
    R = np.linalg.cholesky(M)
    W = (A * dk) @ A.T
    T = solve_triangular(R, (W @ L).T, lower=True, check_finite=False)
    smat = W - T.T @ T
    return LaplacePosterior(
        dataset=dataset,
        hypers=hypers,
        f_map=f,
        grad_at_map=grad,
        sigma_fit=sigma_fit,
        loglik_value=loglik_value,
        jitter=jit,
        _xn=xn,
        _smat=smat,
        _logdet_gain=2.0 * float(np.sum(np.log(np.diag(R)))),
        _quad_term=float(u @ u),
    )


def predict_joint(posterior: LaplacePosterior, Q):
    return posterior.predict_joint(Q)


def laplace_evidence(posterior: LaplacePosterior) -> float:
    """Laplace estimate of the log marginal likelihood of the duels."""
    return posterior.loglik_value - 0.5 * posterior._quad_term - 0.5 * posterior._logdet_gain


def fit_hypers(
    dataset: PrefDataset,
    priors: HyperPriors,
    rng: RandomSource,
    current: KernelHypers | None = None,
    n_starts: int = 8,
    max_evals: int = 60,
) -> KernelHypers:
    """MAP-II hyperparameter search: evidence plus hyperprior, Nelder-Mead
    from the current hypers and prior draws.

    Deterministic given the random source. If every start fails to evaluate,
    falls back to the prior-median hypers with a warning.
    """
    if dataset.n_points == 0:
        raise ValueError("fit_hypers needs a nonempty dataset")
    d = dataset.domain.dim
    if current is None:
        current = default_hypers(d)
    gen = rng.child(0).generator
    starts = [current.to_vector()]
    for _ in range(n_starts - 1):
        ls = priors.lengthscale.sample(gen, size=d)
        os_ = priors.outputscale.sample(gen)
        starts.append(np.append(np.log(ls), np.log(os_)))
    x0 = np.vstack(starts)

    warm: dict[int, np.ndarray] = {}

    def neg_objective(V: np.ndarray, sim_idx: np.ndarray) -> np.ndarray:
        out = np.empty(V.shape[0])
        for i, (v, s) in enumerate(zip(V, sim_idx)):
            if np.max(np.abs(v)) > 7.0:
                out[i] = np.inf
                continue
            try:
                hyp = KernelHypers.from_vector(v)
                post = fit_map(dataset, hyp, f0=warm.get(int(s)), grad_tol=1e-6)
                warm[int(s)] = post.f_map
                out[i] = -(laplace_evidence(post) + hyperprior_logpdf(hyp, priors))
            except (FitError, np.linalg.LinAlgError, FloatingPointError):
                out[i] = np.inf
        return out

    bounds = (np.full(d + 1, -7.0), np.full(d + 1, 7.0))
    xs, fs = optim.nelder_mead_batch(
        neg_objective, x0, step=0.3, bounds=bounds, max_evals=max_evals
    )
    best = int(np.argmin(fs))
    if not np.isfinite(fs[best]):
        logger.warning("hyperparameter search failed on every start; using prior medians")
        return KernelHypers(
            np.full(d, np.log(priors.lengthscale.median())),
            float(np.log(priors.outputscale.median())),
        )
    return KernelHypers.from_vector(xs[best])
