"""Signal-processing primitives for RIR pair analysis.

Narrowband complex demodulation, STFT, short-time averaging, noise-floor
and energy-envelope estimation, onset detection and a plumbing-grade RT
estimator. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.fft
import scipy.signal

from . import _kernels
from .errors import (
    ConfigError,
    InputTooShortError,
    InsufficientDecayError,
    NoiseTailError,
    ValidationError,
)
from .types import AnalysisConfig, BandSpec, EnergyEnvelope, Rir

__all__ = [
    "BandSignal",
    "StftGrid",
    "analytic_signal",
    "band_demodulate",
    "short_time_average",
    "stft",
    "estimate_noise_floor",
    "energy_envelope",
    "detect_onset",
    "estimate_rt",
]

FIR_TAPS = 255
KAISER_BETA = 8.0
# Baseband rate after decimation, as a multiple of the band bandwidth.
DECIMATED_RATE_FACTOR = 4
NOISE_TAIL_FRACTION = 0.05
ONSET_THRESHOLD = 0.01  # fraction of peak magnitude (-40 dB)


def _set(obj, name, value):
    object.__setattr__(obj, name, value)


@dataclass(frozen=True, eq=False)
class BandSignal:
    """Complex baseband representation of one RIR in one band.

    band is None for the broadband route (full-rate analytic signal).
    Samples follow the complex-envelope convention: for a real bandpass
    signal the equivalent energy is sum(|samples|^2) / 2 / sample_rate.
    """

    samples: np.ndarray
    sample_rate: float
    band: Optional[BandSpec]
    source_rir: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128, copy=True)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("BandSignal samples must be a non-empty 1-D sequence")
        rate = float(self.sample_rate)
        if rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {rate}")
        if self.band is not None and rate < self.band.bandwidth:
            raise ValidationError(
                f"decimated rate {rate:.1f} Hz aliases band of width {self.band.bandwidth:.1f} Hz"
            )
        samples.setflags(write=False)
        _set(self, "samples", samples)
        _set(self, "sample_rate", rate)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def total_energy(self) -> float:
        """Signal energy in the units of the source RIR (sum x^2 / rate)."""
        return float(np.sum(np.abs(self.samples) ** 2)) / 2.0 / self.sample_rate


@dataclass(frozen=True, eq=False)
class StftGrid:
    """Complex STFT frames (time x frequency) of one RIR."""

    frames: np.ndarray
    times: np.ndarray
    freqs: np.ndarray
    sample_rate: int
    window_len: int
    hop: int
    window_kind: str = "hann"

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.complex128, copy=True)
        times = np.array(self.times, dtype=np.float64, copy=True)
        freqs = np.array(self.freqs, dtype=np.float64, copy=True)
        if frames.ndim != 2 or frames.shape != (times.size, freqs.size):
            raise ValidationError(
                f"frames shape {frames.shape} does not match axes ({times.size}, {freqs.size})"
            )
        for a in (frames, times, freqs):
            a.setflags(write=False)
        _set(self, "frames", frames)
        _set(self, "times", times)
        _set(self, "freqs", freqs)


def rir_energy(rir: Rir) -> float:
    """Total energy of a recording (sum x^2 / rate)."""
    return float(np.sum(rir.samples**2)) / rir.sample_rate


def complex_power(z: np.ndarray) -> np.ndarray:
    """|z|^2 as the real part of z * conj(z).

    The coherence path computes cross terms with the same multiply
    kernel, so for identical inputs the power and cross tracks are
    bit-identical and self-coherence is exactly 1 (np.abs(z)**2 would
    round differently, and re^2 + im^2 differs under FMA).
    """
    return (z * np.conj(z)).real


def analytic_signal(rir: Rir) -> BandSignal:
    """Full-rate analytic signal for the broadband analysis route.

    Computed on a zero-padded buffer: the FFT Hilbert transform is
    circular, and without padding a strong onset leaks across the wrap
    into the decayed tail, corrupting noise-floor estimates there.
    """
    n = rir.samples.size
    analytic = scipy.signal.hilbert(rir.samples, N=scipy.fft.next_fast_len(2 * n))[:n]
    return BandSignal(
        samples=analytic,
        sample_rate=float(rir.sample_rate),
        band=None,
        source_rir=rir.label,
    )


@functools.lru_cache(maxsize=64)
def _lowpass_taps(bandwidth: float, sample_rate: float) -> np.ndarray:
    """Zero-phase prototype lowpass for a band of the given width.

    The cutoff is calibrated so the equivalent-noise bandwidth of the
    forward-backward (double) pass equals `bandwidth`: at these tap
    counts the transition width is comparable to the band itself, so an
    uncalibrated cutoff at bandwidth/2 would noticeably under-collect
    in-band energy.
    """

    def design(cutoff: float) -> np.ndarray:
        return scipy.signal.firwin(FIR_TAPS, cutoff, window=("kaiser", KAISER_BETA), fs=sample_rate)

    def double_pass_enbw(cutoff: float) -> float:
        response = np.abs(np.fft.rfft(design(cutoff), 1 << 16)) ** 4
        # Two-sided equivalent width of the complex-baseband lowpass.
        return 2.0 * np.trapezoid(response, dx=sample_rate / (1 << 16)) / response[0]

    lo, hi = bandwidth * 0.25, min(bandwidth * 1.5, sample_rate / 2 * 0.98)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if double_pass_enbw(mid) < bandwidth:
            lo = mid
        else:
            hi = mid
    taps = design(0.5 * (lo + hi))
    taps.setflags(write=False)
    return taps


def band_demodulate(rir: Rir, band: BandSpec, config: AnalysisConfig) -> BandSignal:
    """Heterodyne one band to complex baseband, lowpass and decimate.

    Zero-phase (forward-backward) filtering preserves arrival times. The
    output magnitude follows the complex-envelope convention: an in-band
    tone of amplitude 1 maps to constant magnitude 1.
    """
    band.validate_for_rate(rir.sample_rate)
    n = rir.samples.size
    if n < 4 * FIR_TAPS:
        raise InputTooShortError(
            f"recording of {n} samples is shorter than 4 filter lengths ({4 * FIR_TAPS})"
        )
    t = np.arange(n) / rir.sample_rate
    mixed = rir.samples * np.exp(-2j * np.pi * band.center * t)
    taps = _lowpass_taps(float(band.bandwidth), float(rir.sample_rate))
    baseband = 2.0 * scipy.signal.filtfilt(taps, 1.0, mixed)
    decim = max(1, int(rir.sample_rate // (DECIMATED_RATE_FACTOR * band.bandwidth)))
    out = BandSignal(
        samples=baseband[::decim],
        sample_rate=rir.sample_rate / decim,
        band=band,
        source_rir=rir.label,
    )
    # Filtering never adds energy (1% headroom for edge padding effects).
    if out.total_energy() > rir_energy(rir) * 1.01:
        raise ValidationError("band energy exceeds source energy; filter is misconfigured")
    return out


def _window_samples(window_s: float, rate: float) -> int:
    w = int(round(window_s * rate))
    if w < 8:
        raise ConfigError(
            f"averaging window of {window_s * 1e3:.3f} ms is {w} samples at {rate:.0f} Hz; need >= 8"
        )
    return w if w % 2 == 1 else w + 1


def short_time_average(values: np.ndarray, window_s: float, rate: float) -> np.ndarray:
    """Centred moving average approximating the short-time expectation.

    Same length as the input; edge windows shrink to the available
    samples. The window is rounded to an odd sample count.
    """
    w = _window_samples(window_s, rate)
    return _kernels.sliding_mean(np.asarray(values), w)


def stft(rir: Rir, config: AnalysisConfig) -> StftGrid:
    """Hann-tapered STFT with frame count floor((N - window)/hop) + 1."""
    wlen, hop = config.stft_window_len, config.stft_hop
    n = rir.samples.size
    if n <= wlen:
        raise InputTooShortError(f"recording of {n} samples is not longer than the {wlen}-sample window")
    n_frames = (n - wlen) // hop + 1
    window = scipy.signal.get_window("hann", wlen, fftbins=True)
    starts = np.arange(n_frames) * hop
    segments = np.lib.stride_tricks.sliding_window_view(rir.samples, wlen)[starts]
    frames = np.fft.rfft(segments * window, axis=1)
    times = (starts + wlen / 2) / rir.sample_rate
    freqs = np.fft.rfftfreq(wlen, 1.0 / rir.sample_rate)
    return StftGrid(
        frames=frames,
        times=times,
        freqs=freqs,
        sample_rate=rir.sample_rate,
        window_len=wlen,
        hop=hop,
    )


def estimate_noise_floor(
    band: BandSignal,
    *,
    allow_short: bool = False,
    segment: Optional[Tuple[float, float]] = None,
    noise_truncated: bool = False,
) -> float:
    """Stationary noise energy from the tail of a recording.

    Median of |samples|^2 over the final 5% (or over an explicit time
    segment), which resists residual decay contamination. Recordings
    flagged as noise-truncated have no usable tail and are refused.
    """
    if noise_truncated:
        raise NoiseTailError(
            f"recording {band.source_rir!r} is flagged noise-truncated; supply its noise energy explicitly"
        )
    if band.duration < 1.0 and not allow_short and segment is None:
        raise InputTooShortError(
            f"recording of {band.duration:.3f} s is shorter than 1 s; pass allow_short=True to accept"
        )
    power = complex_power(band.samples)
    if segment is not None:
        start, end = segment
        i0 = int(round(start * band.sample_rate))
        i1 = int(round(end * band.sample_rate))
        if not (0 <= i0 < i1 <= power.size):
            raise ValidationError(f"noise segment [{start}, {end}] s is outside the recording")
        tail = power[i0:i1]
    else:
        tail = power[-max(1, int(round(NOISE_TAIL_FRACTION * power.size))):]
    return float(np.median(tail))


def energy_envelope(band: BandSignal, noise: float, config: AnalysisConfig) -> EnergyEnvelope:
    """Short-time signal energy E_s(t) = max(avg(|x|^2) - E_n, 0)."""
    if noise < 0:
        raise ValidationError(f"noise energy must be >= 0, got {noise}")
    power = short_time_average(complex_power(band.samples), config.avg_window, band.sample_rate)
    signal = np.maximum(power - noise, 0.0)
    return EnergyEnvelope(
        times=band.times,
        signal_energy=signal,
        noise_energy=noise,
        band=band.band,
        source=band.source_rir,
    )


def detect_onset(rir: Rir) -> int:
    """First sample whose magnitude exceeds 1% of the global peak."""
    magnitude = np.abs(rir.samples)
    threshold = ONSET_THRESHOLD * magnitude.max()
    return int(np.flatnonzero(magnitude > threshold)[0])


def estimate_rt(rir: Rir, *, fit_range_db: Tuple[float, float] = (-5.0, -25.0)) -> float:
    """Reverberation time from Schroeder backward integration.

    A straight line is fitted to the energy-decay curve between -5 and
    -25 dB and extrapolated to 60 dB. Used only to order measurement
    conditions; not a calibrated room-acoustic parameter implementation.
    """
    fs = rir.sample_rate
    power = _kernels.sliding_mean(rir.samples**2, _window_samples(0.01, fs))
    floor = float(np.median(power[-max(1, int(round(NOISE_TAIL_FRACTION * power.size))):]))
    peak = float(power.max())
    dynamic_db = 10 * np.log10(peak / floor) if floor > 0 else np.inf
    # Need the -25 dB fit end plus ~10 dB of margin above the noise floor.
    if dynamic_db < 35.0:
        raise InsufficientDecayError(
            f"decay range {dynamic_db:.1f} dB is below the 35 dB required for a -5..-25 dB fit"
        )
    onset = detect_onset(rir)
    if floor > 0:
        above = np.flatnonzero(power >= 10.0 * floor)
        limit = int(above[-1]) + 1 if above.size else power.size
    else:
        limit = power.size
    squared = rir.samples[onset:limit] ** 2
    edc = np.cumsum(squared[::-1])[::-1]
    edc_db = 10 * np.log10(edc / edc[0])
    hi, lo = fit_range_db
    i_hi = int(np.argmax(edc_db <= hi))
    i_lo = int(np.argmax(edc_db <= lo))
    if i_lo <= i_hi or edc_db[i_lo] > lo:
        raise InsufficientDecayError("energy-decay curve never reaches the fit range")
    t = np.arange(i_hi, i_lo + 1) / fs
    slope, _ = np.polyfit(t, edc_db[i_hi : i_lo + 1], 1)
    if slope >= 0:
        raise InsufficientDecayError("energy-decay curve is not decaying over the fit range")
    return float(-60.0 / slope)
