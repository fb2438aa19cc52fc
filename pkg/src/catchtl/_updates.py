"""Conjugate Gibbs updates shared by the abundance samplers.

All three models carry the same Gaussian layer: per-year response columns
(log mean abundance or log rate) regressed on year covariates with a
coefficient matrix and a full cross-class covariance. The updates below are
exact conditional draws; they take pre-drawn unit noise so the surrounding
loop owns the random sequence (tests feed them generator draws directly).

These run once per MCMC iteration on matrices of dimension 1-6, where
LAPACK wrapper overhead dominates, so the implementations use raw
``scipy.linalg.lapack`` routines and closed forms for one and two classes
instead of ``numpy.linalg``/``scipy.linalg`` toplevel calls. Same algebra
as the readable reference in :mod:`catchtl.stats`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import get_lapack_funcs

from .stats import NotPositiveDefiniteError, _inv_wishart_from_noise

_probe = np.empty((2, 2))
_potrf, _potrs, _trtrs, _potri = get_lapack_funcs(
    ("potrf", "potrs", "trtrs", "potri"), (_probe,)
)


def _chol_lower(a: np.ndarray) -> np.ndarray:
    c, info = _potrf(a, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        raise NotPositiveDefiniteError(f"leading minor {info} is not positive")
    return c


def chol_solve_draw(prec: np.ndarray, rhs: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Draw from N(prec^-1 rhs, prec^-1): conditional mean plus L^-T noise."""
    c = _chol_lower(prec)
    mean, info = _potrs(c, rhs, lower=1)
    pert, info = _trtrs(c, noise, lower=1, trans=1)
    return mean + pert


def gibbs_coeff_matrix(
    y: np.ndarray,
    z: np.ndarray,
    cov_inv: np.ndarray,
    prior_mean: np.ndarray,
    prior_prec: np.ndarray,
    normals: np.ndarray,
) -> np.ndarray:
    """Exact conditional draw of the (J x q) coefficient matrix.

    Model: rows y_t ~ N(A z_t, Cov) with independent normal priors on the
    entries of A. In the flat class-major ordering A.ravel(), the
    conditional precision is kron(Cov^-1, Z'Z) plus the prior precision
    diagonal.
    """
    j, q = prior_mean.shape
    ztz = z.T @ z
    prec = (cov_inv[:, None, :, None] * ztz[None, :, None, :]).reshape(j * q, j * q)
    prec.flat[:: j * q + 1] += prior_prec.ravel()
    rhs = (cov_inv @ (y.T @ z)).ravel() + prior_prec.ravel() * prior_mean.ravel()
    return chol_solve_draw(prec, rhs, normals).reshape(j, q)


def gibbs_covariance(
    resid: np.ndarray,
    prior_scale: np.ndarray,
    prior_dof: float,
    normals: np.ndarray,
    chi2: np.ndarray,
) -> np.ndarray:
    """Inverse-Wishart conditional draw given residual rows resid_t."""
    scale = prior_scale + resid.T @ resid
    d = scale.shape[0]
    if d == 1:
        return np.array([[scale[0, 0] / chi2[0]]])
    if d == 2:
        # Bartlett construction, written out: V = A^-1 L' and draw = V'V
        l11 = math.sqrt(scale[0, 0])
        l21 = scale[1, 0] / l11
        l22sq = scale[1, 1] - l21 * l21
        if l22sq <= 0.0:
            raise NotPositiveDefiniteError("conditional scale matrix is not positive-definite")
        l22 = math.sqrt(l22sq)
        a11 = math.sqrt(chi2[0])
        a22 = math.sqrt(chi2[1])
        a21 = normals[1, 0]
        v11 = l11 / a11
        v12 = l21 / a11
        v21 = -a21 * v11 / a22
        v22 = (l22 - a21 * v12) / a22
        x11 = v11 * v11 + v21 * v21
        x12 = v11 * v12 + v21 * v22
        x22 = v12 * v12 + v22 * v22
        return np.array([[x11, x12], [x12, x22]])
    return _inv_wishart_from_noise(scale, normals, chi2)


def gibbs_variance(sq_sum: float, prior_rate: float, gamma_unit: float) -> float:
    """Inverse-gamma conditional draw for a random-effect variance.

    ``gamma_unit`` must be a Gamma(prior_shape + count/2, 1) draw; that shape
    is data-independent, so the loop pre-draws it and this just divides the
    conditional rate by it.
    """
    return (prior_rate + 0.5 * sq_sum) / gamma_unit


def precision_from_covariance(cov: np.ndarray) -> np.ndarray:
    """Symmetric inverse via Cholesky; raises if not positive-definite."""
    d = cov.shape[0]
    if d == 1:
        if cov[0, 0] <= 0.0:
            raise NotPositiveDefiniteError("variance must be positive")
        return np.array([[1.0 / cov[0, 0]]])
    if d == 2:
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        if det <= 0.0 or cov[0, 0] <= 0.0:
            raise NotPositiveDefiniteError("covariance is not positive-definite")
        return np.array(
            [[cov[1, 1] / det, -cov[0, 1] / det], [-cov[0, 1] / det, cov[0, 0] / det]]
        )
    c = _chol_lower(cov)
    inv, info = _potri(c, lower=1)
    return inv + np.tril(inv, -1).T
