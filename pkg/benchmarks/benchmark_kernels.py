#!/usr/bin/env python3
"""Benchmark the compiled sweep kernels against the NumPy fallback.

Times each kernel at the per-iteration sizes the samplers actually use
(17 years x 2 classes x 4 days) and a full capture-recapture fit under
both backends. Run after building the extension:

    python benchmarks/benchmark_kernels.py [--iters 20000]
"""

import argparse
import time

import numpy as np

from catchtl import kernels
from catchtl.rng import RngStream


def _inputs(seed: int):
    gen = RngStream(seed).generator()
    t_n, j_n, d = 17, 2, 4
    cells = t_n * j_n
    rows = t_n * d * j_n
    return {
        "abundance_sweep": (
            (gen.integers(10, 5000, size=cells) + 0.0),
            gen.integers(0, 10, size=cells).astype(float),
            gen.normal(size=cells) + 6.0,
            -gen.random(cells),
            gen.random(cells),
            np.log(gen.random(cells)),
            gen.random(cells) * 30 + 1,
            np.zeros(cells, dtype=np.uint8),
        ),
        "detect_effects_sweep": (
            gen.normal(size=rows) * 0.3,
            gen.normal(size=rows) - 3.0,
            gen.integers(0, 60, size=rows).astype(float),
            gen.integers(60, 4000, size=rows).astype(float),
            np.full(rows, 5.0),
            gen.normal(size=rows),
            np.log(gen.random(rows)),
            np.full(rows, 0.8),
            np.zeros(rows, dtype=np.uint8),
        ),
        "log_mean_sweep": (
            gen.normal(size=t_n) + 7.0,
            gen.integers(100, 5000, size=t_n).astype(float),
            np.ones(t_n),
            gen.normal(size=t_n) + 7.0,
            1.3,
            gen.normal(size=t_n) * 0.05,
            gen.normal(size=t_n),
            np.log(gen.random(t_n)),
            np.full(t_n, 0.4),
            np.zeros(t_n, dtype=np.uint8),
        ),
    }


def bench_kernels(iters: int) -> None:
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["native"] = kernels.get_backend("native")
    except ImportError:
        print("compiled backend not built; benchmarking the fallback only")

    print(f"\nper-kernel timings ({iters} calls, representative sweep sizes)")
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for fn_name, args in _inputs(0).items():
        per_backend = {}
        for name, backend in backends.items():
            fn = getattr(backend, fn_name)
            call_args = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
            fn(*call_args)  # warm up
            start = time.perf_counter()
            for _ in range(iters):
                fn(*call_args)
            per_backend[name] = (time.perf_counter() - start) / iters * 1e6
        row = f"{fn_name:<22}" + "".join(f"{per_backend[n]:>11.2f} us" for n in backends)
        if len(per_backend) == 2:
            row += f"{per_backend['python'] / per_backend['native']:>9.1f}x"
        print(row)


def bench_full_fit() -> None:
    import os
    import subprocess
    import sys

    print("\nfull capture-recapture fit (scenario I data, 4000 iterations)")
    code = (
        "import time\n"
        "from catchtl import kernels\n"
        "from catchtl.chains import McmcConfig\n"
        "from catchtl.crmodel import fit_cr\n"
        "from catchtl.rng import RngStream\n"
        "from catchtl.simstudy import generate_cr_data, generate_population, scenario\n"
        "spec = scenario('I', base_seed=1)\n"
        "truth = generate_population(spec, RngStream(1).split('p'))\n"
        "ds = generate_cr_data(truth, spec.beta_cr, spec.sigma2, spec, RngStream(1).split('d'))\n"
        "cfg = McmcConfig(iterations=4000, burn_in=1000, thin=4)\n"
        "fit_cr(ds, config=cfg, rng=RngStream(2))\n"
        "t0 = time.perf_counter()\n"
        "fit_cr(ds, config=cfg, rng=RngStream(2))\n"
        "dt = time.perf_counter() - t0\n"
        "print(f'  {kernels.active():<8} {dt:6.2f} s  ({dt / 4000 * 1e6:6.0f} us/iteration)')\n"
    )
    for backend in ("python", "native"):
        env = dict(os.environ, CATCHTL_KERNELS=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"  {backend:<8} unavailable ({proc.stderr.strip().splitlines()[-1]})")
        else:
            print(proc.stdout, end="")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=20_000)
    args = parser.parse_args()
    print(f"active backend at import: {kernels.active()}")
    bench_kernels(args.iters)
    bench_full_fit()


if __name__ == "__main__":
    main()
