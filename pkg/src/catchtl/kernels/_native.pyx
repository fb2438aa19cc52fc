# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Metropolis sweep kernels.

Same contracts as ``catchtl.kernels.reference``; see the docstrings there.
Tight C loops over the cells instead of vectorized NumPy, which removes the
per-call array overhead that dominates at the small per-iteration sizes the
samplers use.
"""

from libc.math cimport exp, floor, fabs, lgamma, log1p

import numpy as np

BACKEND = "native"


cdef inline double softplus(double x) nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def abundance_sweep(
    double[::1] n,
    double[::1] floor_d,
    double[::1] log_theta,
    double[::1] slogq,
    double[::1] step_u,
    double[::1] log_u,
    double[::1] width,
    unsigned char[::1] accept,
):
    cdef Py_ssize_t i, c = n.shape[0]
    cdef double w, v, mag, prop, delta
    with nogil:
        for i in range(c):
            w = width[i] + 0.5
            w = floor(w)
            if w < 1.0:
                w = 1.0
            v = 2.0 * step_u[i] - 1.0
            mag = 1.0 + floor(fabs(v) * w)
            if mag > w:
                mag = w
            prop = n[i] - mag if v < 0.0 else n[i] + mag
            accept[i] = 0
            if prop < floor_d[i]:
                continue
            delta = (
                lgamma(n[i] - floor_d[i] + 1.0)
                - lgamma(prop - floor_d[i] + 1.0)
                + (prop - n[i]) * (log_theta[i] + slogq[i])
            )
            if log_u[i] < delta:
                n[i] = prop
                accept[i] = 1


def detect_effects_sweep(
    double[::1] eps,
    double[::1] xb,
    double[::1] caught,
    double[::1] total,
    double[::1] inv_two_sigma2,
    double[::1] z,
    double[::1] log_u,
    double[::1] scale,
    unsigned char[::1] accept,
):
    cdef Py_ssize_t i, c = eps.shape[0]
    cdef double prop, eta0, eta1, delta
    with nogil:
        for i in range(c):
            prop = eps[i] + scale[i] * z[i]
            eta0 = xb[i] + eps[i]
            eta1 = xb[i] + prop
            delta = (
                caught[i] * (eta1 - eta0)
                - total[i] * (softplus(eta1) - softplus(eta0))
                - (prop * prop - eps[i] * eps[i]) * inv_two_sigma2[i]
            )
            if log_u[i] < delta:
                eps[i] = prop
                accept[i] = 1
            else:
                accept[i] = 0


def log_mean_sweep(
    double[::1] eta,
    double[::1] y_eff,
    double[::1] e_eff,
    double[::1] mu,
    double kjj,
    double[::1] cross,
    double[::1] z,
    double[::1] log_u,
    double[::1] scale,
    unsigned char[::1] accept,
):
    cdef Py_ssize_t i, c = eta.shape[0]
    cdef double prop, r0, r1, delta
    with nogil:
        for i in range(c):
            prop = eta[i] + scale[i] * z[i]
            r0 = eta[i] - mu[i]
            r1 = prop - mu[i]
            delta = (
                y_eff[i] * (prop - eta[i])
                - e_eff[i] * (exp(prop) - exp(eta[i]))
                - 0.5 * kjj * (r1 * r1 - r0 * r0)
                - (r1 - r0) * cross[i]
            )
            if log_u[i] < delta:
                eta[i] = prop
                accept[i] = 1
            else:
                accept[i] = 0


def coeff_block_step(
    double[::1] beta,
    double[::1] xb,
    double[::1] eps,
    double[::1] dxb,
    double[::1] caught,
    double[::1] total,
    double[::1] prior_mean,
    double[::1] prior_prec,
    double[::1] z,
    double log_u,
    double scale,
):
    cdef Py_ssize_t i, c = xb.shape[0], q = beta.shape[0]
    cdef double eta0, eta1, ddata = 0.0, dprior = 0.0, prop, cur
    with nogil:
        for i in range(c):
            eta0 = xb[i] + eps[i]
            eta1 = eta0 + scale * dxb[i]
            ddata += caught[i] * (eta1 - eta0) - total[i] * (softplus(eta1) - softplus(eta0))
        for i in range(q):
            prop = beta[i] + scale * z[i] - prior_mean[i]
            cur = beta[i] - prior_mean[i]
            dprior -= 0.5 * prior_prec[i] * (prop * prop - cur * cur)
    if log_u < ddata + dprior:
        for i in range(q):
            beta[i] = beta[i] + scale * z[i]
        for i in range(c):
            xb[i] = xb[i] + scale * dxb[i]
        return 1
    return 0
