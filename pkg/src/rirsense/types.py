"""Immutable domain types shared by every analysis stage.

All arrays are converted to float64 (or complex128) copies and marked
read-only, so instances can be shared freely between concurrent tasks.
Coherence values live in [0, 1]; points where the estimate is undefined
(windowed energy below the guard floor) are marked with NaN, never with
a silent 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import ValidationError

__all__ = [
    "Rir",
    "BandSpec",
    "AnalysisConfig",
    "CoherenceCurve",
    "EnergyEnvelope",
    "SensitivityRating",
    "TFCoherenceMap",
    "UNDEFINED",
]

# Marker for coherence points with no defined estimate.
UNDEFINED = float("nan")


def _frozen_array(value, dtype, name: str) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _set(obj, name: str, value) -> None:
    object.__setattr__(obj, name, value)


@dataclass(frozen=True, eq=False)
class Rir:
    """A single-channel room impulse response recording.

    Samples are real pressure values in arbitrary linear units; every
    analysis downstream is invariant to a common positive scale per RIR.
    """

    sample_rate: int
    samples: np.ndarray
    channel_id: str = "0"
    source_id: str = "src"
    receiver_id: str = "rcv"
    condition_id: str = ""

    def __post_init__(self):
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        _set(self, "sample_rate", int(self.sample_rate))
        samples = _frozen_array(self.samples, np.float64, "samples")
        if samples.size == 0:
            raise ValidationError("samples must be non-empty")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("samples contain non-finite values")
        if not np.any(samples != 0.0):
            raise ValidationError("all-zero recording rejected")
        _set(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def label(self) -> str:
        return f"{self.condition_id}:{self.receiver_id}:{self.channel_id}:{self.source_id}"

    def rescaled(self, gain: float) -> "Rir":
        """Copy with samples multiplied by a positive gain."""
        if gain <= 0:
            raise ValidationError("gain must be positive")
        return replace(self, samples=self.samples * gain)

    def __eq__(self, other):
        if not isinstance(other, Rir):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.channel_id == other.channel_id
            and self.source_id == other.source_id
            and self.receiver_id == other.receiver_id
            and self.condition_id == other.condition_id
            and np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash((self.sample_rate, self.label, self.samples.size))


@dataclass(frozen=True)
class BandSpec:
    """A constant-bandwidth analysis band centred on `center` Hz."""

    center: float
    bandwidth: float

    def __post_init__(self):
        _set(self, "center", float(self.center))
        _set(self, "bandwidth", float(self.bandwidth))
        if self.bandwidth <= 0:
            raise ValidationError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.center - self.bandwidth / 2 <= 0:
            raise ValidationError(
                f"band [{self.low:.1f}, {self.high:.1f}] Hz extends to or below 0 Hz"
            )

    @property
    def low(self) -> float:
        return self.center - self.bandwidth / 2

    @property
    def high(self) -> float:
        return self.center + self.bandwidth / 2

    def validate_for_rate(self, sample_rate: float) -> None:
        if self.high >= sample_rate / 2:
            raise ValidationError(
                f"band edge {self.high:.1f} Hz is at or above Nyquist ({sample_rate / 2:.1f} Hz)"
            )

    def describe(self) -> str:
        return f"{self.center:g}Hz/{self.bandwidth:g}Hz"


def band_label(band: Optional[BandSpec]) -> str:
    return "broadband" if band is None else f"{band.center:g}"


@dataclass(frozen=True)
class AnalysisConfig:
    """Parameters of the short-time analysis.

    avg_window is the short-time expectation window in seconds;
    snr_threshold_db bounds the usable RIR region; the STFT parameters
    only affect the time-frequency path; guard_epsilon is the relative
    floor (fraction of the peak windowed energy) below which coherence
    is marked undefined instead of dividing by ~0.
    """

    avg_window: float = 0.010
    snr_threshold_db: float = 30.0
    stft_window_len: int = 512
    stft_hop: int = 128
    guard_epsilon: float = 1e-12

    def __post_init__(self):
        if self.avg_window <= 0:
            raise ValidationError(f"avg_window must be positive, got {self.avg_window}")
        if self.snr_threshold_db <= 0:
            raise ValidationError(f"snr_threshold_db must be positive, got {self.snr_threshold_db}")
        if not (0 < self.stft_hop <= self.stft_window_len):
            raise ValidationError(
                f"stft_hop must satisfy 0 < hop <= window_len, got hop={self.stft_hop} window={self.stft_window_len}"
            )
        if self.guard_epsilon <= 0:
            raise ValidationError(f"guard_epsilon must be positive, got {self.guard_epsilon}")


def _check_gamma_range(gamma: np.ndarray, name: str) -> None:
    defined = gamma[~np.isnan(gamma)]
    if defined.size and (defined.min() < 0.0 or defined.max() > 1.0):
        raise ValidationError(f"{name} values outside [0, 1]: range [{defined.min()}, {defined.max()}]")


def _check_times(times: np.ndarray) -> None:
    if times.size == 0:
        raise ValidationError("time axis must be non-empty")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ValidationError("time axis must be strictly increasing")


@dataclass(frozen=True, eq=False)
class CoherenceCurve:
    """Short-time coherence over time for one RIR pair in one band.

    gamma holds the magnitude-squared coherence in [0, 1]; NaN marks
    points where the windowed energy was below the guard floor.
    """

    times: np.ndarray
    gamma: np.ndarray
    band: Optional[BandSpec]
    pair_id: Tuple[str, str]

    def __post_init__(self):
        times = _frozen_array(self.times, np.float64, "times")
        gamma = _frozen_array(self.gamma, np.float64, "gamma")
        _check_times(times)
        if times.size != gamma.size:
            raise ValidationError(f"times ({times.size}) and gamma ({gamma.size}) length mismatch")
        _check_gamma_range(gamma, "gamma")
        _set(self, "times", times)
        _set(self, "gamma", gamma)
        _set(self, "pair_id", tuple(self.pair_id))

    @property
    def defined(self) -> np.ndarray:
        """Boolean mask of points with a defined coherence estimate."""
        return ~np.isnan(self.gamma)

    def __eq__(self, other):
        if not isinstance(other, CoherenceCurve):
            return NotImplemented
        return (
            self.band == other.band
            and self.pair_id == other.pair_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.gamma, other.gamma, equal_nan=True)
        )

    def __hash__(self):
        return hash((self.band, self.pair_id, self.times.size))


@dataclass(frozen=True, eq=False)
class EnergyEnvelope:
    """Short-time signal energy over time plus the stationary noise energy."""

    times: np.ndarray
    signal_energy: np.ndarray
    noise_energy: float
    band: Optional[BandSpec] = None
    source: str = ""

    def __post_init__(self):
        times = _frozen_array(self.times, np.float64, "times")
        energy = _frozen_array(self.signal_energy, np.float64, "signal_energy")
        _check_times(times)
        if times.size != energy.size:
            raise ValidationError(
                f"times ({times.size}) and signal_energy ({energy.size}) length mismatch"
            )
        if energy.size and energy.min() < 0:
            raise ValidationError("signal_energy must be non-negative")
        noise = float(self.noise_energy)
        if not np.isfinite(noise) or noise < 0:
            raise ValidationError(f"noise_energy must be a finite non-negative scalar, got {noise}")
        _set(self, "times", times)
        _set(self, "signal_energy", energy)
        _set(self, "noise_energy", noise)

    @property
    def total_power(self) -> np.ndarray:
        """Short-time total power (signal plus stationary noise)."""
        return self.signal_energy + self.noise_energy

    def __eq__(self, other):
        if not isinstance(other, EnergyEnvelope):
            return NotImplemented
        return (
            self.band == other.band
            and self.source == other.source
            and self.noise_energy == other.noise_energy
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.signal_energy, other.signal_energy)
        )

    def __hash__(self):
        return hash((self.band, self.source, self.noise_energy, self.times.size))


@dataclass(frozen=True)
class SensitivityRating:
    """Energy-weighted change rating for one pair in one band.

    gamma_rating is 0 for identical RIRs and approaches 1 when the pair
    is completely uncorrelated over the usable region; truncation_index
    is the last time index included in the weighted sums.
    """

    band: Optional[BandSpec]
    gamma_rating: float
    truncation_index: int
    pair_id: Tuple[str, str]

    def __post_init__(self):
        rating = float(self.gamma_rating)
        if not np.isfinite(rating) or not (0.0 <= rating <= 1.0):
            raise ValidationError(f"gamma_rating must lie in [0, 1], got {rating}")
        if int(self.truncation_index) < 0:
            raise ValidationError(f"truncation_index must be >= 0, got {self.truncation_index}")
        _set(self, "gamma_rating", rating)
        _set(self, "truncation_index", int(self.truncation_index))
        _set(self, "pair_id", tuple(self.pair_id))


@dataclass(frozen=True, eq=False)
class TFCoherenceMap:
    """Short-time coherence on a time-frequency grid (frames x bins)."""

    times: np.ndarray
    freqs: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times, np.float64, "times")
        freqs = _frozen_array(self.freqs, np.float64, "freqs")
        gamma = np.array(self.gamma, dtype=np.float64, copy=True)
        _check_times(times)
        if gamma.ndim != 2 or gamma.shape != (times.size, freqs.size):
            raise ValidationError(
                f"gamma shape {gamma.shape} does not match (times, freqs) = ({times.size}, {freqs.size})"
            )
        _check_gamma_range(gamma.ravel(), "gamma")
        gamma.setflags(write=False)
        _set(self, "times", times)
        _set(self, "freqs", freqs)
        _set(self, "gamma", gamma)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.gamma)

    def __eq__(self, other):
        if not isinstance(other, TFCoherenceMap):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.freqs, other.freqs)
            and np.array_equal(self.gamma, other.gamma, equal_nan=True)
        )

    def __hash__(self):
        return hash((self.times.size, self.freqs.size))
