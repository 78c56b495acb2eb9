"""Hot inner loops: centred sliding-window means over long sample arrays.

These dominate the runtime of coherence analysis (three windowed means
per pair per band). The default implementation is numba-JIT'd; setting
the environment variable RIRSENSE_NO_NUMBA=1 (or running without numba
installed) selects a pure-numpy fallback built on direct convolution.
Both paths use direct O(N*W) summation: cumulative-sum tricks lose
precision in the decayed tail of an RIR, where windowed energies are
many orders of magnitude below the running total.

Edges use shrunken windows (the mean over the available samples), so
output length always equals input length. Window lengths must be odd.

benchmarks/bench_kernels.py compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "backend",
    "sliding_mean",
    "sliding_mean_numpy",
    "sliding_mean_numba",
]


def _env_disables_numba() -> bool:
    return os.environ.get("RIRSENSE_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


def sliding_mean_numpy(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average via direct convolution (numpy path)."""
    if window % 2 == 0 or window < 1:
        raise ValueError(f"window must be a positive odd sample count, got {window}")
    values = np.asarray(values)
    n = values.size
    half = window // 2
    # Full convolution then a centred slice; out-of-range samples contribute
    # zero to the sums and are excluded from the counts (shrunken edges).
    kernel = np.ones(window)
    sums = np.convolve(values, kernel, mode="full")[half : half + n]
    counts = np.convolve(np.ones(n), kernel, mode="full")[half : half + n]
    return sums / counts


try:  # pragma: no cover - exercised indirectly through the dispatched name
    if _env_disables_numba():
        raise ImportError("numba disabled via RIRSENSE_NO_NUMBA")
    from numba import njit

    # Both kernels accumulate in the same 4-lane order, so the real part
    # of the complex kernel is bit-identical to the real kernel on
    # matching input (self-coherence relies on this). Direct per-window
    # summation: running-sum tricks lose precision in decayed RIR tails.

    @njit(cache=True)
    def _sliding_mean_nb_real(values, window):
        n = values.shape[0]
        half = window // 2
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            lo = i - half
            if lo < 0:
                lo = 0
            hi = i + half + 1
            if hi > n:
                hi = n
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            j = lo
            while j + 4 <= hi:
                a0 += values[j]
                a1 += values[j + 1]
                a2 += values[j + 2]
                a3 += values[j + 3]
                j += 4
            rest = 0.0
            while j < hi:
                rest += values[j]
                j += 1
            out[i] = ((a0 + a1) + (a2 + a3) + rest) / (hi - lo)
        return out

    @njit(cache=True)
    def _sliding_mean_nb_complex(values, window):
        n = values.shape[0]
        half = window // 2
        out = np.empty(n, dtype=np.complex128)
        re = values.real.copy()
        im = values.imag.copy()
        for i in range(n):
            lo = i - half
            if lo < 0:
                lo = 0
            hi = i + half + 1
            if hi > n:
                hi = n
            r0 = 0.0
            r1 = 0.0
            r2 = 0.0
            r3 = 0.0
            q0 = 0.0
            q1 = 0.0
            q2 = 0.0
            q3 = 0.0
            j = lo
            while j + 4 <= hi:
                r0 += re[j]
                r1 += re[j + 1]
                r2 += re[j + 2]
                r3 += re[j + 3]
                q0 += im[j]
                q1 += im[j + 1]
                q2 += im[j + 2]
                q3 += im[j + 3]
                j += 4
            rest_r = 0.0
            rest_q = 0.0
            while j < hi:
                rest_r += re[j]
                rest_q += im[j]
                j += 1
            count = hi - lo
            out[i] = complex(
                ((r0 + r1) + (r2 + r3) + rest_r) / count,
                ((q0 + q1) + (q2 + q3) + rest_q) / count,
            )
        return out

    def sliding_mean_numba(values: np.ndarray, window: int) -> np.ndarray:
        """Centred moving average via a JIT'd direct loop (numba path)."""
        if window % 2 == 0 or window < 1:
            raise ValueError(f"window must be a positive odd sample count, got {window}")
        values = np.asarray(values)
        if np.iscomplexobj(values):
            return _sliding_mean_nb_complex(np.ascontiguousarray(values, dtype=np.complex128), window)
        return _sliding_mean_nb_real(np.ascontiguousarray(values, dtype=np.float64), window)

    _BACKEND = "numba"
    sliding_mean = sliding_mean_numba
except ImportError:
    sliding_mean_numba = None
    _BACKEND = "numpy"
    sliding_mean = sliding_mean_numpy


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _BACKEND
