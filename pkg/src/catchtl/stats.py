"""Numerical primitives shared by all samplers.

Link functions, dense Cholesky factorization, random-variate generators
(multivariate normal, inverse-Wishart, inverse-gamma) and the log-densities
the posterior evaluations need. Covariance matrices are plain symmetric
ndarrays; ``validate_covariance`` enforces the symmetry contract and
``cholesky`` the positive-definiteness one.

Every sampler is a pure function of its parameters and the random source:
calling it again with the same :class:`~catchtl.rng.RngStream` reproduces
the draw bitwise. Samplers also accept an already-instantiated
``numpy.random.Generator``, which is advanced in place (this is what the
MCMC loops use internally).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, multigammaln

from .rng import RngStream

__all__ = [
    "NotPositiveDefiniteError",
    "cholesky",
    "inv_logit",
    "inv_gamma_logpdf",
    "inv_wishart_logpdf",
    "logit",
    "mvn_logpdf",
    "normal_logpdf",
    "poisson_logpmf",
    "sample_inv_gamma",
    "sample_inv_wishart",
    "sample_mvn",
    "validate_covariance",
]

_SYM_TOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be positive-definite is not."""


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def logit(p):
    """log(p / (1 - p)), elementwise; defined only on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("logit requires probabilities strictly inside (0, 1)")
    out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)

def inv_logit(x):
    """Logistic function 1 / (1 + exp(-x)), the exact inverse of `logit`."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x)
    out = np.empty_like(x1)
    pos = x1 >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x1[pos]))
    ex = np.exp(x1[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out.reshape(x.shape)


def validate_covariance(m: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Check squareness and symmetry (within 1e-12 relative); return as float array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()) if m.size else 1.0)
    if np.abs(m - m.T).max(initial=0.0) > _SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric to within {_SYM_TOL:g}")
    return m


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m.

    Raises NotPositiveDefiniteError when a leading minor is non-positive.
    """
    m = validate_covariance(m, "matrix")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive-definite: {exc}") from exc


def sample_mvn(
    mean: np.ndarray,
    cov: np.ndarray,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """Draw from N(mean, cov) via mean + L z with z standard normal."""
    mean = np.asarray(mean, dtype=float)
    cov = validate_covariance(cov)
    if mean.ndim != 1 or cov.shape[0] != mean.shape[0]:
        raise ValueError(f"dimension mismatch: mean {mean.shape}, cov {cov.shape}")
    gen = _as_generator(rng)
    z = gen.standard_normal(mean.shape[0])
    return mean + cholesky(cov) @ z


def _inv_wishart_from_noise(
    scale: np.ndarray, normals: np.ndarray, chi2: np.ndarray
) -> np.ndarray:
    """Bartlett construction of an inverse-Wishart draw from pre-drawn noise.

    ``normals`` is a (d, d) standard-normal block (strict lower triangle used),
    ``chi2`` the d chi-square draws for the diagonal at degrees of freedom
    (dof, dof-1, ..., dof-d+1). Shared by the direct sampler and the Gibbs
    updates so both use the identical algorithm.
    """
    d = scale.shape[0]
    # With A the Bartlett factor (A A' ~ Wishart(dof, I)) and scale = L L',
    # the inverse of Wishart(dof, scale^-1) is L (A A')^-1 L' = V'V for
    # V = A^-1 L', a product of two triangular solves.
    l_scale = cholesky(scale)
    a = np.tril(normals, k=-1)
    a[np.diag_indices(d)] = np.sqrt(chi2)
    v = solve_triangular(a, l_scale.T, lower=True)
    draw = v.T @ v
    return 0.5 * (draw + draw.T)


def sample_inv_wishart(
    scale: np.ndarray,
    dof: float,
    rng: RngStream | np.random.Generator,
) -> np.ndarray:
    """Inverse-Wishart draw with the given scale matrix and degrees of freedom.

    Requires dof > dim - 1. The Monte Carlo mean converges to
    scale / (dof - dim - 1) when dof > dim + 1.
    """
    scale = validate_covariance(scale, "scale")
    d = scale.shape[0]
    if not dof > d - 1:
        raise ValueError(f"degrees of freedom must exceed dim - 1 = {d - 1}, got {dof}")
    gen = _as_generator(rng)
    normals = gen.standard_normal((d, d))
    chi2 = gen.chisquare(dof - np.arange(d))
    return _inv_wishart_from_noise(scale, normals, chi2)


def sample_inv_gamma(
    shape: float,
    rate: float,
    rng: RngStream | np.random.Generator,
) -> float:
    """Inverse-gamma draw, shape-rate parameterization: density ~ x^(-shape-1) e^(-rate/x)."""
    if not (shape > 0.0 and rate > 0.0):
        raise ValueError("inverse-gamma shape and rate must be positive")
    gen = _as_generator(rng)
    return rate / gen.gamma(shape)


def poisson_logpmf(y, rate):
    """Poisson log-mass y*log(rate) - rate - log(y!); log-factorial via log-gamma."""
    y_arr = np.asarray(y)
    rate_arr = np.asarray(rate, dtype=float)
    if np.any(rate_arr <= 0.0):
        raise ValueError("Poisson rate must be positive")
    integral = np.issubdtype(y_arr.dtype, np.integer) or np.all(y_arr == np.floor(y_arr))
    if np.any(y_arr < 0) or not integral:
        raise ValueError("Poisson count must be a non-negative integer")
    out = y_arr * np.log(rate_arr) - rate_arr - gammaln(np.asarray(y_arr, dtype=float) + 1.0)
    return out if out.ndim else float(out)


def normal_logpdf(x, mean, var):
    """Univariate normal log-density, elementwise."""
    x = np.asarray(x, dtype=float)
    out = -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)
    return out if out.ndim else float(out)


def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal log-density at a single point."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    l_cov = cholesky(cov)
    resid = solve_triangular(l_cov, x - mean, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(l_cov)))
    return float(-0.5 * (x.size * np.log(2.0 * np.pi) + logdet + resid @ resid))


def inv_gamma_logpdf(x: float, shape: float, rate: float) -> float:
    """Log-density of the shape-rate inverse-gamma at x > 0."""
    if x <= 0.0:
        return -np.inf
    return float(shape * np.log(rate) - gammaln(shape) - (shape + 1.0) * np.log(x) - rate / x)


def inv_wishart_logpdf(x: np.ndarray, scale: np.ndarray, dof: float) -> float:
    """Log-density of the inverse-Wishart at a positive-definite matrix x."""
    d = scale.shape[0]
    l_x = cholesky(x)
    l_scale = cholesky(scale)
    logdet_x = 2.0 * np.sum(np.log(np.diag(l_x)))
    logdet_scale = 2.0 * np.sum(np.log(np.diag(l_scale)))
    # tr(scale @ x^-1) via triangular solves
    w = solve_triangular(l_x, l_scale, lower=True)
    trace = float(np.sum(w * w))
    return float(
        0.5 * dof * logdet_scale
        - 0.5 * dof * d * np.log(2.0)
        - multigammaln(0.5 * dof, d)
        - 0.5 * (dof + d + 1.0) * logdet_x
        - 0.5 * trace
    )
