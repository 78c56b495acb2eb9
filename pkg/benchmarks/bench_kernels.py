#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

The sliding-window means dominate coherence analysis (three per pair per
band), so this compares both backends on realistic sizes and verifies
they agree numerically. Run:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from rirsense import _kernels


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(label, values, window):
    numpy_t = _time(_kernels.sliding_mean_numpy, values, window)
    row = f"{label:<46} window={window:<5} numpy {numpy_t * 1e3:8.2f} ms"
    if _kernels.sliding_mean_numba is not None:
        _kernels.sliding_mean_numba(values, window)  # JIT warm-up
        numba_t = _time(_kernels.sliding_mean_numba, values, window)
        a = _kernels.sliding_mean_numba(values, window)
        b = _kernels.sliding_mean_numpy(values, window)
        scale = np.max(np.abs(b))
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * scale), "backends disagree"
        row += f"   numba {numba_t * 1e3:8.2f} ms   speedup {numpy_t / numba_t:5.1f}x"
    print(row)


def main():
    print(f"active backend: {_kernels.backend()}")
    if _kernels.sliding_mean_numba is None:
        print("numba unavailable or disabled (RIRSENSE_NO_NUMBA); timing numpy only")
    rng = np.random.default_rng(0)

    real_short = rng.standard_normal(8_000)
    real_long = rng.standard_normal(96_000)
    cplx_band = rng.standard_normal(16_000) + 1j * rng.standard_normal(16_000)
    cplx_broad = rng.standard_normal(96_000) + 1j * rng.standard_normal(96_000)

    bench_case("band power, 4 kHz baseband, 2 s", real_short, 41)
    bench_case("broadband power, 48 kHz, 2 s", real_long, 481)
    bench_case("band cross-product, 4 kHz baseband, 4 s", cplx_band, 41)
    bench_case("broadband cross-product, 48 kHz, 2 s", cplx_broad, 481)


if __name__ == "__main__":
    main()
