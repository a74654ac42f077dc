"""Timing comparison of the compiled and pure NumPy grid kernels.

Runs the two hot stencils on a range of grid sizes, plus a short
end-to-end generation, under each backend, and prints one table. Usage:

    python3 benchmarks/kernel_bench.py [--repeats N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from stci import _pykern, datagen
from stci.core import GridSpec, InterventionSpec, region_mask
from stci.datagen import DiffusionParams

try:
    from stci import _simkern
except ImportError:
    _simkern = None


def time_callable(fn, repeats):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeats, number)) / number


def backend_modules():
    backends = [("python", _pykern)]
    if _simkern is not None:
        backends.append(("compiled", _simkern))
    return backends


def bench_stencils(sizes, repeats):
    rows = []
    rng = np.random.default_rng(0)
    for size in sizes:
        grid = rng.standard_normal((size, size))
        for op_name in ("laplacian", "neighborhood_mean"):
            timings = {}
            for backend_name, module in backend_modules():
                fn = getattr(module, op_name)
                if op_name == "laplacian":
                    call = lambda: fn(grid)
                else:
                    call = lambda: fn(grid, 1)
                timings[backend_name] = time_callable(call, repeats)
            rows.append((op_name, f"{size}x{size}", timings))
    return rows


def bench_generate(repeats):
    grid = GridSpec(n_rows=32, n_cols=32, n_steps=200, lag=1)
    params = DiffusionParams()
    spec = InterventionSpec(region=region_mask(32, 32))
    rows = []
    timings = {}
    saved = (datagen.laplacian, datagen.neighborhood_mean)
    try:
        for backend_name, module in backend_modules():
            datagen.laplacian = module.laplacian
            datagen.neighborhood_mean = module.neighborhood_mean
            call = lambda: datagen.generate(grid, params, spec, seed=0)
            timings[backend_name] = time_callable(call, repeats)
    finally:
        datagen.laplacian, datagen.neighborhood_mean = saved
    rows.append(("generate", "32x32x200", timings))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats per measurement (default 3)")
    args = parser.parse_args()

    if _simkern is None:
        print("compiled extension not available; timing the python backend only")

    rows = bench_stencils((16, 32, 64, 128), args.repeats)
    rows += bench_generate(args.repeats)

    header = f"{'operation':<18} {'size':>10} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for op_name, size, timings in rows:
        python_us = timings["python"] * 1e6
        if "compiled" in timings:
            compiled_us = timings["compiled"] * 1e6
            speedup = f"{python_us / compiled_us:8.2f}x"
            compiled_text = f"{compiled_us:10.1f}us"
        else:
            speedup = "      n/a"
            compiled_text = "       n/a"
        print(f"{op_name:<18} {size:>10} {python_us:10.1f}us {compiled_text} {speedup}")


if __name__ == "__main__":
    main()
