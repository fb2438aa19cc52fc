"""Backend agreement: the compiled kernels and the NumPy fallback implement
the same sweeps. Floating-point results may differ in the last bits between
backends, so single-sweep outputs are compared at 1e-12 and acceptance
decisions exactly (at these seeds no proposal lands within float noise of
its threshold)."""

import numpy as np
import pytest

from catchtl import kernels
from catchtl.rng import RngStream

native = pytest.importorskip("catchtl.kernels._native")
reference = kernels.get_backend("python")


def _both(fn_name, *arrays, scalars=()):
    """Run one kernel on both backends with identical inputs; return outputs."""
    outs = []
    for backend in (reference, native):
        copies = [a.copy() for a in arrays]
        ret = getattr(backend, fn_name)(*copies, *scalars)
        outs.append((ret, copies))
    return outs


def test_backend_selected():
    assert kernels.active() in ("native", "python")
    assert reference.BACKEND == "python"
    assert native.BACKEND == "native"


def test_abundance_sweep_parity():
    gen = RngStream(101).generator()
    c = 64
    floor_d = gen.integers(0, 40, size=c).astype(float)
    n = floor_d + gen.integers(0, 60, size=c)
    log_theta = np.log(n + 1.0)
    slogq = -gen.random(c) * 2.0
    step_u = gen.random(c)
    log_u = np.log(gen.random(c))
    width = gen.random(c) * 20.0 + 1.0
    (r_py, py), (r_nat, nat) = _both(
        "abundance_sweep", n, floor_d, log_theta, slogq, step_u, log_u, width,
        np.zeros(c, dtype=np.uint8),
    )
    assert np.array_equal(py[7], nat[7])          # identical accept decisions
    assert np.array_equal(py[0], nat[0])          # integer states match exactly
    assert np.all(py[0] >= floor_d)


def test_detect_effects_sweep_parity():
    gen = RngStream(102).generator()
    c = 96
    eps = gen.normal(size=c)
    xb = gen.normal(size=c) - 2.0
    caught = gen.integers(0, 50, size=c).astype(float)
    total = caught + gen.integers(0, 200, size=c)
    inv2s = np.full(c, 1.0 / (2.0 * 0.4))
    z = gen.normal(size=c)
    log_u = np.log(gen.random(c))
    scale = gen.random(c) + 0.2
    (r_py, py), (r_nat, nat) = _both(
        "detect_effects_sweep", eps, xb, caught, total, inv2s, z, log_u, scale,
        np.zeros(c, dtype=np.uint8),
    )
    assert np.array_equal(py[8], nat[8])
    assert np.max(np.abs(py[0] - nat[0])) <= 1e-12


def test_log_mean_sweep_parity():
    gen = RngStream(103).generator()
    c = 40
    eta = gen.normal(size=c) + 4.0
    y_eff = gen.integers(0, 500, size=c).astype(float)
    e_eff = gen.random(c) + 0.5
    mu = gen.normal(size=c) + 4.0
    cross = gen.normal(size=c) * 0.1
    z = gen.normal(size=c)
    log_u = np.log(gen.random(c))
    scale = gen.random(c) * 0.5 + 0.05
    out = []
    for backend in (reference, native):
        eta_c = eta.copy()
        acc = np.zeros(c, dtype=np.uint8)
        backend.log_mean_sweep(eta_c, y_eff, e_eff, mu, 1.7, cross, z, log_u, scale, acc)
        out.append((eta_c, acc))
    assert np.array_equal(out[0][1], out[1][1])
    assert np.max(np.abs(out[0][0] - out[1][0])) <= 1e-12


def test_coeff_block_step_parity():
    gen = RngStream(104).generator()
    c, q = 60, 3
    xmat = np.column_stack([np.ones(c), gen.normal(size=(c, q - 1))])
    beta = np.array([-2.0, 0.5, -0.3])
    xb = xmat @ beta
    eps = gen.normal(size=c) * 0.3
    caught = gen.integers(0, 60, size=c).astype(float)
    total = caught + gen.integers(0, 300, size=c)
    prior_mean = np.zeros(q)
    prior_prec = np.full(q, 1e-2)
    for trial in range(20):
        z = gen.normal(size=q)
        dxb = xmat @ z
        log_u = float(np.log(gen.random()))
        scale = 0.15
        results = []
        for backend in (reference, native):
            b = beta.copy()
            x = xb.copy()
            acc = backend.coeff_block_step(
                b, x, eps, dxb, caught, total, prior_mean, prior_prec, z, log_u, scale
            )
            results.append((acc, b, x))
        assert results[0][0] == results[1][0]
        assert np.max(np.abs(results[0][1] - results[1][1])) <= 1e-12
        assert np.max(np.abs(results[0][2] - results[1][2])) <= 1e-12


def test_kernels_deterministic_per_backend():
    gen = RngStream(105).generator()
    c = 32
    eps = gen.normal(size=c)
    xb = gen.normal(size=c)
    caught = gen.integers(0, 20, size=c).astype(float)
    total = caught + 10.0
    inv2s = np.full(c, 0.5)
    z = gen.normal(size=c)
    log_u = np.log(gen.random(c))
    scale = np.full(c, 0.7)
    for backend in (reference, native):
        runs = []
        for _ in range(2):
            e = eps.copy()
            acc = np.zeros(c, dtype=np.uint8)
            backend.detect_effects_sweep(e, xb, caught, total, inv2s, z, log_u, scale, acc)
            runs.append((e, acc))
        assert np.array_equal(runs[0][0], runs[1][0])
        assert np.array_equal(runs[0][1], runs[1][1])
