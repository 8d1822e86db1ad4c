"""Derivative-free maximization used by every acquisition and by the
hyperparameter search: Sobol raw candidates, then Nelder-Mead refinement
from the top starts.

The Nelder-Mead here runs all restarts in lockstep so each sweep evaluates
one batch of candidate points; objectives that are cheap per point but carry
per-call overhead (kernel algebra) benefit directly. Coefficients are the
standard reflection/expansion/contraction/shrink values.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .stats import BoxDomain, RandomSource, sobol_sample

__all__ = ["nelder_mead_batch", "maximize_with_restarts"]

# fn(points (K, D), simplex_index (K,)) -> values (K,); minimized.
BatchObjective = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _clipper(bounds):
    if bounds is None:
        return lambda X: X
    lo, hi = bounds
    return lambda X: np.clip(X, lo, hi)


def nelder_mead_batch(
    fn: BatchObjective,
    x0: np.ndarray,
    *,
    step=0.05,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
    max_evals: int = 300,
    xatol: float = 1e-10,
    fatol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ``fn`` from each row of ``x0`` with per-start budget ``max_evals``.

    Returns the per-start best points and values. All starts advance in
    lockstep; each sweep triggers at most three batched objective calls
    (reflection, expansion/contraction, shrink).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    B, D = x0.shape
    clip = _clipper(bounds)
    step_arr = np.broadcast_to(np.asarray(step, dtype=float), (B, D)).copy()

    sim = np.repeat(x0[:, None, :], D + 1, axis=1)
    for j in range(D):
        delta = step_arr[:, j].copy()
        if bounds is not None:
            hi = bounds[1][j] if np.ndim(bounds[1]) else bounds[1]
            over = sim[:, j + 1, j] + delta > hi
            delta[over] = -delta[over]
        sim[:, j + 1, j] += delta
    sim = clip(sim)

    all_idx = np.arange(B)
    flat_idx = np.repeat(all_idx, D + 1)
    F = fn(sim.reshape(B * (D + 1), D), flat_idx).reshape(B, D + 1)
    evals = np.full(B, D + 1)
    active = np.ones(B, dtype=bool)

    def resort():
        order = np.argsort(F, axis=1, kind="stable")
        rows = all_idx[:, None]
        return sim[rows, order], F[rows, order]

    sim, F = resort()
    while True:
        with np.errstate(invalid="ignore"):
            spread_f = F[:, -1] - F[:, 0]
        spread_x = np.max(np.abs(sim - sim[:, :1, :]), axis=(1, 2))
        done = (spread_f <= fatol) & (spread_x <= xatol)
        budget_out = evals + D + 2 > max_evals
        active &= ~(done | budget_out)
        if not active.any():
            break
        idx = np.where(active)[0]
        cent = sim[idx, :D].mean(axis=1)
        worst = sim[idx, D]
        xr = clip(cent + (cent - worst))
        fr = fn(xr, idx)
        evals[idx] += 1

        fbest, fsecond, fworst = F[idx, 0], F[idx, D - 1], F[idx, D]
        expand = fr < fbest
        accept_r = ~expand & (fr < fsecond)
        contract = ~expand & ~accept_r

        new_pts = xr.copy()
        new_f = fr.copy()
        shrink = np.zeros(idx.size, dtype=bool)

        if expand.any():
            sub = np.where(expand)[0]
            xe = clip(cent[sub] + 2.0 * (cent[sub] - worst[sub]))
            fe = fn(xe, idx[sub])
            evals[idx[sub]] += 1
            use = fe < fr[sub]
            new_pts[sub[use]] = xe[use]
            new_f[sub[use]] = fe[use]

        if contract.any():
            sub = np.where(contract)[0]
            outside = fr[sub] < fworst[sub]
            xc = np.where(
                outside[:, None],
                cent[sub] + 0.5 * (xr[sub] - cent[sub]),
                cent[sub] - 0.5 * (cent[sub] - worst[sub]),
            )
            xc = clip(xc)
            fc = fn(xc, idx[sub])
            evals[idx[sub]] += 1
            ok = np.where(outside, fc <= fr[sub], fc < fworst[sub])
            new_pts[sub[ok]] = xc[ok]
            new_f[sub[ok]] = fc[ok]
            shrink[sub[~ok]] = True

        keep = ~shrink
        rows = idx[keep]
        sim[rows, D] = new_pts[keep]
        F[rows, D] = new_f[keep]

        if shrink.any():
            rows = idx[shrink]
            sim[rows, 1:] = sim[rows, :1] + 0.5 * (sim[rows, 1:] - sim[rows, :1])
            sim[rows] = clip(sim[rows])
            pts = sim[rows, 1:].reshape(rows.size * D, D)
            F[rows, 1:] = fn(pts, np.repeat(rows, D)).reshape(rows.size, D)
            evals[rows] += D

        sim, F = resort()
    return sim[:, 0], F[:, 0]


def maximize_with_restarts(
    fn_batch: Callable[[np.ndarray], np.ndarray],
    domain: BoxDomain,
    rng: RandomSource,
    n_raw: int = 1024,
    n_starts: int = 8,
    max_evals: int = 300,
    simplex_rel: float = 0.05,
) -> tuple[np.ndarray, float]:
    """Maximize a batch objective over a box: Sobol raw phase, then
    Nelder-Mead from the top raw candidates. Deterministic given the seed;
    ties resolve to the first-found maximum.
    """
    raw = sobol_sample(n_raw, domain, rng.child(0))
    raw_vals = fn_batch(raw)
    top = np.argsort(-raw_vals, kind="stable")[: min(n_starts, n_raw)]
    x0 = raw[top]

    def neg(X, _sim):
        return -fn_batch(X)

    xs, fs = nelder_mead_batch(
        neg,
        x0,
        step=simplex_rel * domain.width,
        bounds=(domain.lower, domain.upper),
        max_evals=max_evals,
    )
    cand_x = np.vstack([xs, raw[top[:1]]])
    cand_v = np.concatenate([-fs, raw_vals[top[:1]]])
    best = int(np.argmax(cand_v))
    return cand_x[best], float(cand_v[best])
