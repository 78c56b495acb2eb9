"""Pair-level orchestration of the time-frequency analysis route."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List

import numpy as np

from .coherence import frame_mean, tf_coherence, tf_frame_halfwidth
from .dsp import NOISE_TAIL_FRACTION, StftGrid, complex_power, detect_onset, stft
from .errors import NoUsableRegionError, PairingError
from .sensitivity import snr_truncation_index, tf_sensitivity
from .types import AnalysisConfig, EnergyEnvelope, Rir, TFCoherenceMap

__all__ = ["stft_envelopes", "TfAnalysis", "analyze_pair_tf"]


def stft_envelopes(grid: StftGrid, config: AnalysisConfig) -> List[EnergyEnvelope]:
    """Per-bin energy envelopes from an STFT grid.

    Frame powers are averaged over the same 2L+1-frame span the
    time-frequency coherence uses; the per-bin noise energy is the
    median frame power over the final 5% of frames.
    """
    power = complex_power(grid.frames)
    halfwidth = tf_frame_halfwidth(config, grid.sample_rate)
    smoothed = frame_mean(power, halfwidth)
    tail = power[-max(1, int(round(NOISE_TAIL_FRACTION * power.shape[0]))):]
    noise = np.median(tail, axis=0)
    envelopes = []
    for j in range(grid.freqs.size):
        envelopes.append(
            EnergyEnvelope(
                times=grid.times,
                signal_energy=np.maximum(smoothed[:, j] - noise[j], 0.0),
                noise_energy=float(noise[j]),
                band=None,
                source=f"bin{j}",
            )
        )
    return envelopes


@dataclass(frozen=True)
class TfAnalysis:
    """Time-frequency coherence map plus the per-bin sensitivity ratings.

    truncation_by_freq holds the last usable frame per bin (-1 where no
    frame satisfies the SNR threshold); usable_gamma() masks the map to
    the onset..truncation region so noise-dominated tails do not read as
    coherence loss.
    """

    map: TFCoherenceMap
    gamma_by_freq: np.ndarray
    onset_frame: int
    truncation_by_freq: np.ndarray

    def usable_gamma(self) -> np.ndarray:
        masked = np.array(self.map.gamma)
        frames = np.arange(masked.shape[0])[:, None]
        masked[(frames < self.onset_frame) | (frames > self.truncation_by_freq[None, :])] = np.nan
        return masked


def analyze_pair_tf(x: Rir, y: Rir, config: AnalysisConfig) -> TfAnalysis:
    """STFT both recordings, correlate per bin and rate per bin."""
    if x.sample_rate != y.sample_rate:
        raise PairingError(f"sample-rate mismatch: {x.sample_rate} vs {y.sample_rate} Hz")
    n = min(x.samples.size, y.samples.size)
    if abs(x.samples.size - y.samples.size) > 0.01 * max(x.samples.size, y.samples.size):
        raise PairingError("length mismatch beyond 1%")
    grid_x = stft(_trim(x, n), config)
    grid_y = stft(_trim(y, n), config)
    tf_map = tf_coherence(grid_x, grid_y, config)
    envs_x = stft_envelopes(grid_x, config)
    envs_y = stft_envelopes(grid_y, config)
    onset_sample = max(detect_onset(x), detect_onset(y))
    onset_frame = int(np.argmin(np.abs(grid_x.times - onset_sample / x.sample_rate)))
    gamma_by_freq = tf_sensitivity(tf_map, envs_x, envs_y, config, onset_frame=onset_frame)
    truncation = np.full(tf_map.freqs.size, -1, dtype=np.int64)
    for j in range(tf_map.freqs.size):
        try:
            truncation[j] = snr_truncation_index(
                envs_x[j], envs_y[j], config.snr_threshold_db, onset=onset_frame
            )
        except NoUsableRegionError:
            pass
    return TfAnalysis(
        map=tf_map,
        gamma_by_freq=gamma_by_freq,
        onset_frame=onset_frame,
        truncation_by_freq=truncation,
    )


def _trim(rir: Rir, n: int) -> Rir:
    return rir if rir.samples.size == n else replace(rir, samples=rir.samples[:n])
