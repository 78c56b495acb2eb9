"""Sensitivity rating: energy-weighted change measure over the usable RIR region.

The rating is the weighted mean of (1 - gamma) between the onset and the
last index where both recordings hold at least the SNR threshold, with
weights sqrt(P_x P_y) built from the short-time *total* power (signal
plus noise); truncation alone handles noise exclusion. 0 means the pair
is identical over the usable region, 1 completely uncorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .coherence import (
    align_pair,
    environment_coherence,
    expected_coherence,
    short_time_coherence,
)
from .dsp import (
    analytic_signal,
    band_demodulate,
    detect_onset,
    energy_envelope,
    estimate_noise_floor,
)
from .errors import (
    AnalysisError,
    ConfigError,
    NoUsableRegionError,
    PairingError,
    ValidationError,
)
from .types import (
    AnalysisConfig,
    BandSpec,
    CoherenceCurve,
    EnergyEnvelope,
    Rir,
    SensitivityRating,
    TFCoherenceMap,
)

__all__ = [
    "snr_truncation_index",
    "sensitivity_rating",
    "band_sweep",
    "tf_sensitivity",
    "median_sensitivity",
    "BandFailure",
    "linear_bands",
    "DEFAULT_BANDS",
]


def linear_bands(
    start: float = 1000.0, stop: float = 19000.0, step: float = 1000.0, bandwidth: float = 1000.0
) -> List[BandSpec]:
    """Constant-bandwidth bands on a linear grid of centre frequencies."""
    centers = np.arange(start, stop + step / 2, step)
    return [BandSpec(center=float(c), bandwidth=bandwidth) for c in centers]


#: 1-kHz-wide bands centred 1..19 kHz, the default frequency sweep.
DEFAULT_BANDS = linear_bands()


@dataclass(frozen=True)
class BandFailure:
    """Explicit record of a band where no usable region existed."""

    band: Optional[BandSpec]
    pair_id: tuple
    reason: str


BandResult = Union[SensitivityRating, BandFailure]


def _snr_curves(env_x: EnergyEnvelope, env_y: EnergyEnvelope) -> np.ndarray:
    def ratio(env: EnergyEnvelope) -> np.ndarray:
        if env.noise_energy == 0.0:
            return np.full(env.signal_energy.shape, np.inf)
        return env.signal_energy / env.noise_energy

    return np.minimum(ratio(env_x), ratio(env_y))


def snr_truncation_index(
    env_x: EnergyEnvelope,
    env_y: EnergyEnvelope,
    threshold_db: float,
    *,
    onset: int = 0,
) -> int:
    """Last index of the contiguous run from the onset where both SNRs hold.

    Returns the end of the first run of indices with
    min(E_sx/E_nx, E_sy/E_ny) >= 10^(threshold_db/10); for a noiseless
    pair this is the last index. Raises NoUsableRegionError when the
    threshold already fails at the onset.
    """
    if threshold_db <= 0:
        raise ConfigError(f"threshold_db must be positive, got {threshold_db}")
    if not np.array_equal(env_x.times, env_y.times):
        raise PairingError("energy envelopes are on different time axes")
    n = env_x.times.size
    if not (0 <= onset < n):
        raise ValidationError(f"onset index {onset} outside envelope of length {n}")
    if env_x.noise_energy == 0.0 and env_y.noise_energy == 0.0:
        return n - 1
    snr = _snr_curves(env_x, env_y)
    threshold = 10.0 ** (threshold_db / 10.0)
    if snr[onset] < threshold:
        raise NoUsableRegionError(
            f"SNR {10 * np.log10(max(snr[onset], 1e-300)):.1f} dB at the onset is below "
            f"{threshold_db:.1f} dB; no usable region"
        )
    below = np.flatnonzero(snr[onset:] < threshold)
    return n - 1 if below.size == 0 else onset + int(below[0]) - 1


def _weighted_complement(
    gamma: np.ndarray, weights: np.ndarray, t_min: int, t_max: int
) -> float:
    g = gamma[t_min : t_max + 1]
    w = weights[t_min : t_max + 1]
    defined = ~np.isnan(g)
    if not defined.any():
        raise AnalysisError("every coherence point in the usable region is undefined")
    den = float(np.sum(w[defined]))
    if den <= 0:
        raise AnalysisError("weights sum to zero over the usable region")
    num = float(np.sum((1.0 - g[defined]) * w[defined]))
    return min(max(num / den, 0.0), 1.0)


def sensitivity_rating(
    curve: CoherenceCurve,
    env_x: EnergyEnvelope,
    env_y: EnergyEnvelope,
    t_max: int,
    *,
    t_min: int = 0,
) -> SensitivityRating:
    """Weighted mean of (1 - gamma) over [t_min, t_max].

    Weights are sqrt(P_x P_y) with P the short-time total power, so the
    rating is symmetric in the pair and invariant to a positive
    rescaling of either recording. Undefined coherence points are
    excluded from both sums. t_min defaults to 0; pipelines pass the
    detected onset.
    """
    for env in (env_x, env_y):
        if not np.array_equal(curve.times, env.times):
            raise PairingError("coherence curve and envelopes are on different time axes")
    n = curve.times.size
    if not (0 <= t_min <= t_max < n):
        raise ValidationError(f"invalid range [{t_min}, {t_max}] for curve of length {n}")
    weights = np.sqrt(env_x.total_power * env_y.total_power)
    rating = _weighted_complement(curve.gamma, weights, t_min, t_max)
    return SensitivityRating(
        band=curve.band,
        gamma_rating=rating,
        truncation_index=t_max,
        pair_id=curve.pair_id,
    )


@dataclass(frozen=True)
class BandAnalysis:
    """Everything computed for one pair in one band."""

    band: Optional[BandSpec]
    measured: CoherenceCurve
    expected: CoherenceCurve
    environment: CoherenceCurve
    env_x: EnergyEnvelope
    env_y: EnergyEnvelope
    onset_index: int
    rating: SensitivityRating


@dataclass(frozen=True)
class NoiseSpec:
    """Noise-floor override for one recording.

    energy supplies E_n directly; segment restricts the tail estimate to
    a time range; truncated marks recordings with no usable noise tail
    (the estimator then refuses unless energy is given).
    """

    energy: Optional[float] = None
    segment: Optional[tuple] = None
    truncated: bool = False


def _noise_energy(band_signal, spec: Optional[NoiseSpec]) -> float:
    if spec is not None and spec.energy is not None:
        return float(spec.energy)
    segment = spec.segment if spec is not None else None
    truncated = spec.truncated if spec is not None else False
    return estimate_noise_floor(
        band_signal, allow_short=True, segment=segment, noise_truncated=truncated
    )


def analyze_band(
    x: Rir,
    y: Rir,
    band: Optional[BandSpec],
    config: AnalysisConfig,
    *,
    noise_x: Optional[NoiseSpec] = None,
    noise_y: Optional[NoiseSpec] = None,
) -> BandAnalysis:
    """Full single-band pipeline: demodulate, estimate, correlate, rate.

    band=None selects the broadband route (full-rate analytic signal).
    """
    if x.sample_rate != y.sample_rate:
        raise PairingError(f"sample-rate mismatch: {x.sample_rate} vs {y.sample_rate} Hz")
    if band is None:
        bx, by = analytic_signal(x), analytic_signal(y)
    else:
        bx = band_demodulate(x, band, config)
        by = band_demodulate(y, band, config)
    bx, by = align_pair(bx, by)
    e_nx = _noise_energy(bx, noise_x)
    e_ny = _noise_energy(by, noise_y)
    env_x = energy_envelope(bx, e_nx, config)
    env_y = energy_envelope(by, e_ny, config)
    measured = short_time_coherence(bx, by, config)
    expected = expected_coherence(env_x, env_y)
    environment = environment_coherence(measured, expected, config)
    onset_s = max(detect_onset(x), detect_onset(y)) / x.sample_rate
    onset = min(int(round(onset_s * bx.sample_rate)), bx.samples.size - 1)
    t_max = snr_truncation_index(env_x, env_y, config.snr_threshold_db, onset=onset)
    rating = sensitivity_rating(measured, env_x, env_y, t_max, t_min=onset)
    return BandAnalysis(
        band=band,
        measured=measured,
        expected=expected,
        environment=environment,
        env_x=env_x,
        env_y=env_y,
        onset_index=onset,
        rating=rating,
    )


def band_sweep(
    x: Rir,
    y: Rir,
    bands: Sequence[Optional[BandSpec]],
    config: AnalysisConfig,
    *,
    noise_x: Optional[NoiseSpec] = None,
    noise_y: Optional[NoiseSpec] = None,
) -> List[BandResult]:
    """Sensitivity rating per band, in input order.

    Bands without a usable region yield a BandFailure entry instead of
    aborting the sweep. A band of None means broadband.
    """
    if x.sample_rate != y.sample_rate:
        raise PairingError(f"sample-rate mismatch: {x.sample_rate} vs {y.sample_rate} Hz")
    nx, ny = x.samples.size, y.samples.size
    if abs(nx - ny) > 0.01 * max(nx, ny):
        raise PairingError(f"length mismatch beyond 1%: {nx} vs {ny} samples")
    pair_id = (x.label, y.label)
    results: List[BandResult] = []
    for band in bands:
        try:
            results.append(
                analyze_band(x, y, band, config, noise_x=noise_x, noise_y=noise_y).rating
            )
        except (NoUsableRegionError, AnalysisError) as exc:
            results.append(BandFailure(band=band, pair_id=pair_id, reason=str(exc)))
    return results


def tf_sensitivity(
    tf_map: TFCoherenceMap,
    envs_x: Sequence[EnergyEnvelope],
    envs_y: Sequence[EnergyEnvelope],
    config: AnalysisConfig,
    *,
    onset_frame: int = 0,
) -> np.ndarray:
    """Sensitivity rating per frequency bin with per-bin truncation.

    Returns one value per bin on the map's frequency axis; bins with no
    usable region are NaN.
    """
    n_bins = tf_map.freqs.size
    if len(envs_x) != n_bins or len(envs_y) != n_bins:
        raise PairingError(
            f"per-bin envelopes ({len(envs_x)}, {len(envs_y)}) do not match {n_bins} bins"
        )
    out = np.full(n_bins, np.nan)
    for j in range(n_bins):
        env_x, env_y = envs_x[j], envs_y[j]
        if not np.array_equal(env_x.times, tf_map.times):
            raise PairingError("per-bin envelope time axis does not match the map")
        try:
            t_max = snr_truncation_index(
                env_x, env_y, config.snr_threshold_db, onset=onset_frame
            )
            weights = np.sqrt(env_x.total_power * env_y.total_power)
            out[j] = _weighted_complement(tf_map.gamma[:, j], weights, onset_frame, t_max)
        except (NoUsableRegionError, AnalysisError):
            pass
    return out


def median_sensitivity(
    ratings: Sequence[SensitivityRating],
) -> Dict[Optional[BandSpec], float]:
    """Per-band median of the ratings, grouped by band."""
    if not ratings:
        raise AnalysisError("median of an empty rating list")
    groups: Dict[Optional[BandSpec], List[float]] = {}
    for r in ratings:
        groups.setdefault(r.band, []).append(r.gamma_rating)
    return {band: float(np.median(values)) for band, values in groups.items()}
