"""Pure-NumPy implementations of the Metropolis sweep kernels.

This is the fallback backend, always importable. The compiled backend in
``_native.pyx`` implements the same four functions with identical semantics;
floating-point results can differ in the last bits (different summation
order and libm), so chains are reproducible per backend, not across
backends.

All arrays are contiguous float64 unless noted; ``accept`` outputs are
uint8 masks. Proposal noise and acceptance thresholds are pre-drawn by the
caller so that the random sequence is owned by a single generator.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

BACKEND = "python"


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def abundance_sweep(n, floor_d, log_theta, slogq, step_u, log_u, width, accept):
    """Integer random-walk Metropolis update of latent abundance, all cells at once.

    Target kernel per cell: log C(n, D) + n * slogq + Poisson(n | theta) mass,
    where slogq = sum_k log(1 - p_k); the lgamma(n + 1) terms cancel between
    the binomial coefficient and the Poisson mass. Proposals are uniform on
    +-{1..w}; proposals below the distinct-animal floor D are rejected.
    """
    w = np.maximum(1.0, np.floor(width + 0.5))
    v = 2.0 * step_u - 1.0
    mag = 1.0 + np.floor(np.abs(v) * w)
    np.minimum(mag, w, out=mag)
    prop = n + np.where(v < 0.0, -mag, mag)
    ok = prop >= floor_d
    safe = np.where(ok, prop, n)
    delta = (
        gammaln(n - floor_d + 1.0)
        - gammaln(safe - floor_d + 1.0)
        + (safe - n) * (log_theta + slogq)
    )
    acc = ok & (log_u < delta)
    n[acc] = prop[acc]
    accept[:] = acc


def detect_effects_sweep(eps, xb, caught, total, inv_two_sigma2, z, log_u, scale, accept):
    """Univariate random-walk Metropolis update of every detection random effect.

    Per cell, with eta = xb + eps, the target is
    caught * eta - total * softplus(eta) - eps^2 * inv_two_sigma2.
    """
    prop = eps + scale * z
    eta0 = xb + eps
    eta1 = xb + prop
    delta = (
        caught * (eta1 - eta0)
        - total * (_softplus(eta1) - _softplus(eta0))
        - (prop * prop - eps * eps) * inv_two_sigma2
    )
    acc = log_u < delta
    eps[acc] = prop[acc]
    accept[:] = acc


def log_mean_sweep(eta, y_eff, e_eff, mu, kjj, cross, z, log_u, scale, accept):
    """Random-walk Metropolis update of one class column of a log-mean layer.

    Data term y_eff * eta - e_eff * exp(eta) (Poisson on the natural scale);
    Gaussian layer term from the joint normal across classes, expressed via
    the precision diagonal kjj and the cross term sum_{l != j} K_jl r_l.
    """
    prop = eta + scale * z
    r0 = eta - mu
    r1 = prop - mu
    delta = (
        y_eff * (prop - eta)
        - e_eff * (np.exp(prop) - np.exp(eta))
        - 0.5 * kjj * (r1 * r1 - r0 * r0)
        - (r1 - r0) * cross
    )
    acc = log_u < delta
    eta[acc] = prop[acc]
    accept[:] = acc


def coeff_block_step(beta, xb, eps, dxb, caught, total, prior_mean, prior_prec, z, log_u, scale):
    """Blockwise Gaussian random-walk Metropolis step for one coefficient vector.

    The caller supplies dxb = X @ z so the kernel works purely elementwise:
    proposal beta + scale * z shifts the linear predictor by scale * dxb.
    Updates beta and xb in place on acceptance; returns 1 if accepted.
    """
    prop = beta + scale * z
    eta0 = xb + eps
    eta1 = eta0 + scale * dxb
    ddata = float(
        np.sum(caught * (eta1 - eta0) - total * (_softplus(eta1) - _softplus(eta0)))
    )
    dprior = -0.5 * float(
        np.sum(prior_prec * ((prop - prior_mean) ** 2 - (beta - prior_mean) ** 2))
    )
    if log_u < ddata + dprior:
        beta[:] = prop
        xb += scale * dxb
        return 1
    return 0
