"""Random-variate generators and small matrix primitives.

Every sampler takes an explicit :class:`numpy.random.Generator`. The order in
which each function consumes variates is part of its contract and is stated in
its docstring, so streams can be replayed.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

JITTER_SCALE = 1e-8


class NumericalError(ArithmeticError):
    """A covariance could not be factorized even after jitter."""


def make_rng(seed, stream_id=0):
    """Independent generator for ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    distinct ``stream_id`` values give statistically independent streams.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def cholesky(a):
    """Lower Cholesky factor, retrying once with diagonal jitter.

    On failure ``1e-8 * mean(diag(a))`` is added to the diagonal. A second
    failure raises :class:`NumericalError`.
    """
    a = np.asarray(a, dtype=float)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    bump = JITTER_SCALE * float(np.mean(np.diag(a)))
    try:
        return np.linalg.cholesky(a + bump * np.eye(a.shape[0]))
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"matrix is not positive definite even after jitter {bump:g}"
        ) from None


def spd_inverse(a):
    """Inverse of an SPD matrix through its Cholesky factor; exactly symmetric."""
    chol = cholesky(a)
    chol_inv = solve_triangular(chol, np.eye(chol.shape[0]), lower=True)
    inv = chol_inv.T @ chol_inv
    return 0.5 * (inv + inv.T)


def mvn_sample(mean, cov, rng):
    """One multivariate normal draw ``mean + L @ z``.

    Consumes ``p`` standard normals from ``rng``.
    """
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal(mean.shape[0])
    return mean + cholesky(cov) @ z


def mvn_sample_many(mean, cov, size, rng):
    """``size`` iid draws as rows; consumes a ``(size, p)`` block of normals row-major."""
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ cholesky(cov).T


def conditional_regression(cov, fixed_idx):
    """Regression form of a Gaussian conditional.

    Returns ``(free_idx, coef, cond_cov)`` such that for any mean ``m`` the
    free block given the fixed block ``x`` has mean
    ``m[free] + coef @ (x - m[fixed])`` and covariance ``cond_cov``.
    """
    cov = np.asarray(cov, dtype=float)
    p = cov.shape[0]
    fixed_idx = np.atleast_1d(np.asarray(fixed_idx, dtype=int))
    if fixed_idx.size == 0 or fixed_idx.size >= p:
        raise ValueError("fixed_idx must be a nonempty proper subset of dimensions")
    free_idx = np.setdiff1d(np.arange(p), fixed_idx)
    s_ff = cov[np.ix_(free_idx, free_idx)]
    s_fx = cov[np.ix_(free_idx, fixed_idx)]
    s_xx = cov[np.ix_(fixed_idx, fixed_idx)]
    try:
        chol = np.linalg.cholesky(s_xx)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance of the fixed block is singular") from None
    # coef = s_fx @ inv(s_xx) via two triangular solves
    tmp = solve_triangular(chol, s_fx.T, lower=True)
    coef = solve_triangular(chol.T, tmp, lower=False).T
    cond_cov = s_ff - coef @ s_fx.T
    return free_idx, coef, 0.5 * (cond_cov + cond_cov.T)


def mvn_condition(mean, cov, fixed_idx, fixed_vals):
    """Conditional mean and covariance of the free block (Schur complement)."""
    mean = np.asarray(mean, dtype=float)
    fixed_idx = np.atleast_1d(np.asarray(fixed_idx, dtype=int))
    free_idx, coef, cond_cov = conditional_regression(cov, fixed_idx)
    resid = np.atleast_1d(np.asarray(fixed_vals, dtype=float)) - mean[fixed_idx]
    return mean[free_idx] + coef @ resid, cond_cov


def _bartlett_factor(chi2, normals):
    """Lower-triangular Bartlett factor from chi-square and normal variates."""
    p = len(chi2)
    a = np.diag(np.sqrt(chi2))
    a[np.tril_indices(p, -1)] = normals
    return a


def wishart_sample(scale, df, rng):
    """Wishart draw with mean ``df * scale`` by Bartlett decomposition.

    Consumes ``p`` gamma variates (the diagonal chi-squares, degrees of freedom
    ``df, df-1, ..., df-p+1``) and then ``p(p-1)/2`` standard normals filling
    the strict lower triangle row by row.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    p = scale.shape[0]
    if df < p:
        raise ValueError(f"degrees of freedom {df} below dimension {p}")
    chol = cholesky(scale)
    chi2 = 2.0 * rng.standard_gamma((df - np.arange(p)) / 2.0)
    normals = rng.standard_normal(p * (p - 1) // 2)
    la = chol @ _bartlett_factor(chi2, normals)
    w = la @ la.T
    return 0.5 * (w + w.T)


def invwishart_sample(scale, df, rng):
    """Inverse-Wishart draw with mean ``scale / (df - p - 1)``.

    This is the inverse of :func:`wishart_sample` with the inverted scale and
    consumes variates identically.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    return spd_inverse(wishart_sample(spd_inverse(scale), df, rng))


def gamma_sample(shape, rate, rng, size=None):
    """Gamma variates with mean ``shape / rate``; one standard gamma per output."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("gamma shape and rate must be positive")
    out = rng.standard_gamma(shape, size=size) / rate
    return float(out) if np.ndim(out) == 0 else out


def cov_to_corr(cov):
    """Correlation matrix with an exact unit diagonal."""
    cov = np.asarray(cov, dtype=float)
    sd = np.sqrt(np.diag(cov))
    if np.any(sd == 0):
        raise ValueError("covariance has a zero diagonal entry")
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return corr
