"""Short-time coherence between RIR pairs and its decomposition.

Measured coherence gamma(t) = |avg(x y*)|^2 / (avg|x|^2 avg|y|^2) with a
shared averaging window, so every defined value obeys the Cauchy-Schwarz
bound gamma <= 1. The measured curve factors into an expected part (pure
decay-vs-noise loss) and an environment part (everything attributable to
the room changing); the environment part entangles absorption, scattering
and occlusion effects and no further disentanglement is attempted here.
"""

from __future__ import annotations

import warnings
from typing import Sequence, Tuple

import numpy as np

from . import _kernels
from .dsp import BandSignal, StftGrid, _window_samples, complex_power
from .errors import AnalysisError, PairingError
from .types import AnalysisConfig, CoherenceCurve, EnergyEnvelope, TFCoherenceMap

__all__ = [
    "short_time_coherence",
    "expected_coherence",
    "environment_coherence",
    "tf_coherence",
    "median_coherence",
    "align_pair",
]

LENGTH_TOLERANCE = 0.01


def align_pair(x: BandSignal, y: BandSignal) -> Tuple[BandSignal, BandSignal]:
    """Validate pair compatibility, trimming lengths that differ by < 1%."""
    if x.band != y.band:
        raise PairingError(f"band mismatch: {x.band} vs {y.band}")
    if x.sample_rate != y.sample_rate:
        raise PairingError(f"sample-rate mismatch: {x.sample_rate} vs {y.sample_rate} Hz")
    nx, ny = x.samples.size, y.samples.size
    if nx == ny:
        return x, y
    if abs(nx - ny) > LENGTH_TOLERANCE * max(nx, ny):
        raise PairingError(f"length mismatch beyond 1%: {nx} vs {ny} samples")
    n = min(nx, ny)
    trim = lambda s: BandSignal(s.samples[:n], s.sample_rate, s.band, s.source_rir)
    return trim(x), trim(y)


def _guarded_gamma(
    cross: np.ndarray, power_x: np.ndarray, power_y: np.ndarray, guard_epsilon: float
) -> np.ndarray:
    """|cross|^2 / (Px Py), NaN where either power is below its guard floor."""
    defined = np.ones(power_x.shape, dtype=bool)
    for p in (power_x, power_y):
        peak = p.max() if p.size else 0.0
        defined &= p >= guard_epsilon * peak
        defined &= p > 0.0
    gamma = np.full(power_x.shape, np.nan)
    den = power_x[defined] * power_y[defined]
    # Clip the ~ulp Cauchy-Schwarz overshoot of independent roundings.
    gamma[defined] = np.clip(complex_power(cross[defined]) / den, 0.0, 1.0)
    return gamma


def short_time_coherence(x: BandSignal, y: BandSignal, config: AnalysisConfig) -> CoherenceCurve:
    """Windowed magnitude-squared coherence of two baseband signals.

    The cross term and the two powers share the same averaging window,
    which makes the estimate symmetric in (x, y) and invariant to a
    positive rescaling of either input.
    """
    x, y = align_pair(x, y)
    w = _window_samples(config.avg_window, x.sample_rate)
    cross = _kernels.sliding_mean(x.samples * np.conj(y.samples), w)
    power_x = _kernels.sliding_mean(complex_power(x.samples), w)
    power_y = _kernels.sliding_mean(complex_power(y.samples), w)
    gamma = _guarded_gamma(cross, power_x, power_y, config.guard_epsilon)
    return CoherenceCurve(
        times=x.times,
        gamma=gamma,
        band=x.band,
        pair_id=(x.source_rir, y.source_rir),
    )


def expected_coherence(env_x: EnergyEnvelope, env_y: EnergyEnvelope) -> CoherenceCurve:
    """Coherence loss expected from decaying signal energy against noise.

    (E_sx E_sy) / ((E_sx + E_nx)(E_sy + E_ny)): the geometric-mean
    generalisation of the equal-envelope form (E_s / (E_s + E_n))^2,
    to which it reduces exactly when the two envelopes match. Pointwise
    monotone non-increasing in each noise energy.
    """
    if not np.array_equal(env_x.times, env_y.times):
        raise PairingError("energy envelopes are on different time axes")
    num = env_x.signal_energy * env_y.signal_energy
    den = env_x.total_power * env_y.total_power
    gamma = np.full(num.shape, np.nan)
    ok = den > 0
    gamma[ok] = np.clip(num[ok] / den[ok], 0.0, 1.0)
    return CoherenceCurve(
        times=env_x.times,
        gamma=gamma,
        band=env_x.band,
        pair_id=(env_x.source, env_y.source),
    )


def environment_coherence(
    measured: CoherenceCurve, expected: CoherenceCurve, config: AnalysisConfig
) -> CoherenceCurve:
    """Residual coherence loss attributed to the environment changing.

    measured / expected, clamped to [0, 1] (estimation noise can push the
    ratio above 1), undefined where the expected value is below the guard
    floor or either input is undefined. The result entangles absorption,
    scattering and occlusion contributions.
    """
    if not np.array_equal(measured.times, expected.times):
        raise PairingError("coherence curves are on different time axes")
    if measured.band != expected.band:
        raise PairingError(f"band mismatch: {measured.band} vs {expected.band}")
    defined = measured.defined & expected.defined
    defined &= np.where(expected.defined, expected.gamma >= config.guard_epsilon, False)
    gamma = np.full(measured.gamma.shape, np.nan)
    gamma[defined] = np.clip(measured.gamma[defined] / expected.gamma[defined], 0.0, 1.0)
    return CoherenceCurve(
        times=measured.times,
        gamma=gamma,
        band=measured.band,
        pair_id=measured.pair_id,
    )


def frame_mean(values: np.ndarray, halfwidth: int) -> np.ndarray:
    """Mean over 2*halfwidth+1 adjacent frames (axis 0), shrunken edges."""
    n = values.shape[0]
    sums = np.zeros_like(values)
    counts = np.zeros(n)
    for k in range(-halfwidth, halfwidth + 1):
        lo, hi = max(0, -k), min(n, n - k)
        sums[lo:hi] += values[lo + k : hi + k]
        counts[lo:hi] += 1
    return sums / counts.reshape(-1, *([1] * (values.ndim - 1)))


def tf_frame_halfwidth(config: AnalysisConfig, sample_rate: float) -> int:
    """Frames on each side so 2L+1 frames span about one averaging window."""
    span_frames = config.avg_window * sample_rate / config.stft_hop
    return max(1, int(round((span_frames - 1) / 2)))


def tf_coherence(x: StftGrid, y: StftGrid, config: AnalysisConfig) -> TFCoherenceMap:
    """Short-time coherence per STFT bin, averaged along the frame axis."""
    if (
        x.window_len != y.window_len
        or x.hop != y.hop
        or x.sample_rate != y.sample_rate
        or x.frames.shape != y.frames.shape
    ):
        raise PairingError("STFT grids have different parameters or shapes")
    halfwidth = tf_frame_halfwidth(config, x.sample_rate)
    cross = frame_mean(x.frames * np.conj(y.frames), halfwidth)
    power_x = frame_mean(complex_power(x.frames), halfwidth)
    power_y = frame_mean(complex_power(y.frames), halfwidth)
    gamma = np.empty(cross.shape)
    for j in range(cross.shape[1]):  # per-bin guard floors
        gamma[:, j] = _guarded_gamma(cross[:, j], power_x[:, j], power_y[:, j], config.guard_epsilon)
    return TFCoherenceMap(times=x.times, freqs=x.freqs, gamma=gamma)


def median_coherence(curves: Sequence[CoherenceCurve]) -> CoherenceCurve:
    """Pointwise median across receivers, robust to outlier curves.

    Undefined points are excluded at each time; a point of the median is
    undefined only where more than half of the inputs are undefined.
    """
    curves = list(curves)
    if not curves:
        raise AnalysisError("median of an empty curve list")
    first = curves[0]
    for c in curves[1:]:
        if not np.array_equal(c.times, first.times):
            raise PairingError("curves are on different time axes")
        if c.band != first.band:
            raise PairingError(f"band mismatch: {c.band} vs {first.band}")
    stack = np.vstack([c.gamma for c in curves])
    undefined_count = np.sum(np.isnan(stack), axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN slices
        med = np.nanmedian(stack, axis=0)
    med[2 * undefined_count > len(curves)] = np.nan
    return CoherenceCurve(
        times=first.times,
        gamma=med,
        band=first.band,
        pair_id=("median", f"{len(curves)} curves"),
    )
