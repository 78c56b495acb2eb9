"""Synthetic RIR pair generators with analytically known ground truth.

Diffuse fields are modelled as exponentially decaying Gaussian noise
(energy -60 dB per RT), which gives closed-form coherence targets that
geometric room simulation would not. All generators are deterministic
per seed; pair members are x = h_x + n_x samplewise exactly, with the
clean components and noise stored alongside the observable sum.

The injected stationary noise level is calibrated against the tail
median estimator used downstream (median of |z|^2 is ln2 times the mean
power for complex Gaussian noise), so an SNR measured through that
estimator matches the requested value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
import scipy.signal

from .errors import ValidationError
from .types import Rir

__all__ = [
    "SyntheticPair",
    "PairTruth",
    "OcclusionSpec",
    "gen_decaying_rir",
    "gen_mixing_pair",
    "gen_occluded_pair",
    "gen_absorption_change_pair",
    "gen_jitter_pair",
    "GENERATORS",
]

# Tail-median of |z|^2 over mean power for complex Gaussian noise.
MEDIAN_TO_MEAN = math.log(2.0)
MAX_JITTER_DRIFT = 1e-3


@dataclass(frozen=True)
class OcclusionSpec:
    """Blocked-arrival descriptor: deepest effect at `start`, spanning `length`."""

    start: float
    length: float
    attenuation_db: float = 30.0


@dataclass(frozen=True)
class PairTruth:
    """Declared theoretical quantities of a generated pair."""

    kind: str
    seed: int
    sample_rate: int
    duration: float
    snr_db: float
    rt: Optional[float] = None
    rt_y: Optional[float] = None
    gamma_ir_target: Optional[float] = None
    occlusion: Optional[OcclusionSpec] = None
    change_time: Optional[float] = None
    late_mixing: Optional[float] = None
    drift: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SyntheticPair:
    """A generated RIR pair with its unobservable components."""

    x: Rir
    y: Rir
    h_x: np.ndarray
    h_y: np.ndarray
    n_x: np.ndarray
    n_y: np.ndarray
    truth: PairTruth

    def __post_init__(self):
        for name in ("h_x", "h_y", "n_x", "n_y"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.array_equal(self.x.samples, self.h_x + self.n_x) or not np.array_equal(
            self.y.samples, self.h_y + self.n_y
        ):
            raise ValidationError("pair members must equal component sums samplewise")


def decay_envelope(t: np.ndarray, rt: float) -> np.ndarray:
    """Amplitude envelope whose energy decays 60 dB over rt seconds."""
    return np.exp(-t * math.log(1e6) / (2.0 * rt))


def noise_sigma(snr_db: float) -> float:
    """Per-sample noise std giving the requested tail-median-measured SNR.

    The reference signal level is the analytic-domain peak power of a
    unit-variance field (2.0); /ln2 compensates the median estimator.
    """
    if not np.isfinite(snr_db):
        return 0.0
    return math.sqrt(10.0 ** (-snr_db / 10.0) / MEDIAN_TO_MEAN)


def _check_decay_args(rt: float, duration: float) -> None:
    if rt <= 0:
        raise ValidationError(f"rt must be positive, got {rt}")
    if duration < rt:
        raise ValidationError(f"duration {duration} s must be at least rt ({rt} s)")


def gen_decaying_rir(
    rt: float, sample_rate: int, duration: float, seed: int, condition_id: str = "decay"
) -> Rir:
    """Gaussian noise shaped by an exponential 60-dB-per-rt decay.

    duration may be shorter than rt (a truncated, near-flat recording);
    the pair generators require duration >= rt so their noise tails are
    fully decayed.
    """
    if rt <= 0:
        raise ValidationError(f"rt must be positive, got {rt}")
    if duration <= 0:
        raise ValidationError(f"duration must be positive, got {duration}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    samples = decay_envelope(t, rt) * rng.standard_normal(n)
    return Rir(sample_rate=sample_rate, samples=samples, condition_id=condition_id)


def _assemble(
    h_x: np.ndarray,
    h_y: np.ndarray,
    sample_rate: int,
    snr_db: float,
    rng: np.random.Generator,
    truth: PairTruth,
    condition_id: str,
) -> SyntheticPair:
    sigma = noise_sigma(snr_db)
    n_x = sigma * rng.standard_normal(h_x.size)
    n_y = sigma * rng.standard_normal(h_y.size)
    x = Rir(sample_rate, h_x + n_x, channel_id="x", condition_id=condition_id)
    y = Rir(sample_rate, h_y + n_y, channel_id="y", condition_id=condition_id)
    return SyntheticPair(x=x, y=y, h_x=h_x, h_y=h_y, n_x=n_x, n_y=n_y, truth=truth)


def gen_mixing_pair(
    a: float,
    rt: float,
    sample_rate: int,
    snr_db: float,
    seed: int,
    duration: Optional[float] = None,
) -> SyntheticPair:
    """Pair with known environment coherence: h_y = a h_x + sqrt(1-a^2) h'.

    h' is an independent field sharing the envelope, so the theoretical
    environment coherence is a^2 at every time and frequency.
    """
    if not (0.0 <= a <= 1.0):
        raise ValidationError(f"mixing coefficient must lie in [0, 1], got {a}")
    duration = rt if duration is None else duration
    _check_decay_args(rt, duration)
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    env = decay_envelope(np.arange(n) / sample_rate, rt)
    g_shared = rng.standard_normal(n)
    g_indep = rng.standard_normal(n)
    h_x = env * g_shared
    h_y = env * (a * g_shared + math.sqrt(1.0 - a * a) * g_indep)
    truth = PairTruth(
        kind="mixing",
        seed=seed,
        sample_rate=sample_rate,
        duration=duration,
        snr_db=snr_db,
        rt=rt,
        gamma_ir_target=a * a,
        late_mixing=a,
    )
    return _assemble(h_x, h_y, sample_rate, snr_db, rng, truth, "mixing")


TAPER_FRACTION = 0.4
TAIL_DEPTH = 0.15


def _occlusion_profile(t: np.ndarray, occ: OcclusionSpec):
    """Blocked-window depth profiles: (bump, tail).

    The bump is a flat-topped unit profile centred on occ.start spanning
    +-length/2 with cosine-squared tapers; the tail is the weak
    progressive re-randomization of the later reflections, decaying over
    ~4 effect lengths.
    """
    half = occ.length / 2.0
    flat = (1.0 - TAPER_FRACTION) * half
    offset = np.abs(t - occ.start)
    taper = np.cos(np.pi * (offset - flat) / (2.0 * (half - flat))) ** 2
    bump = np.where(offset <= flat, 1.0, np.where(offset <= half, taper, 0.0))
    after = t - occ.start
    tail = np.where(after > half, TAIL_DEPTH * np.exp(-(after - half) / (4.0 * occ.length)), 0.0)
    return bump, tail


def gen_occluded_pair(
    rt: float,
    sample_rate: int,
    seed: int,
    occlusion: Optional[OcclusionSpec] = None,
    duration: Optional[float] = None,
    snr_db: float = 60.0,
) -> SyntheticPair:
    """Pair where one member has a blocked arrival around occlusion.start.

    y is x with the occlusion window attenuated and decorrelated via
    phase perturbation in the STFT domain; the perturbation scales with
    frequency (shorter wavelengths are affected more) and decays after
    the window, so late reflections progressively recover.
    """
    occlusion = occlusion if occlusion is not None else OcclusionSpec(start=0.005, length=0.010)
    duration = rt if duration is None else duration
    _check_decay_args(rt, duration)
    n = int(round(duration * sample_rate))
    if not (0.0 <= occlusion.start <= duration):
        raise ValidationError(f"occlusion at {occlusion.start} s lies outside the {duration} s RIR")
    if occlusion.length <= 0:
        raise ValidationError("occlusion length must be positive")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate
    envelope = decay_envelope(t, rt)
    h_x = envelope * rng.standard_normal(n)
    h_alt = envelope * rng.standard_normal(n)  # independent field, same envelope

    # y crossfades between the shared field and the independent one on an
    # STFT grid: cell correlation is 10^(-depth_db/20) exactly, so the
    # blocked window's coherence target is 10^(-depth_db/10) per cell.
    # Shorter wavelengths are affected more (depth scales with frequency).
    wlen = 256 if sample_rate >= 24000 else 128
    sft = scipy.signal.ShortTimeFFT(
        scipy.signal.get_window("hann", wlen, fftbins=True), hop=wlen // 4, fs=sample_rate
    )
    spectrum = sft.stft(h_x)
    spectrum_alt = sft.stft(h_alt)
    bump, tail = _occlusion_profile(sft.t(n), occlusion)
    freq_weight = 0.25 + 0.75 * sft.f / sft.f[-1]
    depth_db = occlusion.attenuation_db * np.outer(freq_weight, bump + tail)
    keep = 10.0 ** (-depth_db / 20.0)
    mixed = keep * spectrum + np.sqrt(1.0 - keep**2) * spectrum_alt
    h_y = sft.istft(mixed, k1=n).real
    bump_t, _ = _occlusion_profile(t, occlusion)
    h_y *= 10.0 ** (-occlusion.attenuation_db * bump_t / 20.0)

    truth = PairTruth(
        kind="occlusion",
        seed=seed,
        sample_rate=sample_rate,
        duration=duration,
        snr_db=snr_db,
        rt=rt,
        occlusion=occlusion,
    )
    return _assemble(h_x, h_y, sample_rate, snr_db, rng, truth, "occlusion")


def gen_absorption_change_pair(
    rt_x: float,
    rt_y: float,
    change_time: float,
    sample_rate: int,
    seed: int,
    duration: Optional[float] = None,
    snr_db: float = 60.0,
    late_mixing: float = 0.0,
) -> SyntheticPair:
    """Pair sharing the direct sound and early field, diverging afterwards.

    Up to change_time both members carry the same field; later samples
    are drawn independently (decays rt_x and rt_y), emulating a changed
    absorption distribution with unchanged early geometry. late_mixing
    in [0, 1] leaves that fraction of amplitude correlation in the late
    field (1 = nothing changed); the late environment-coherence target
    is late_mixing^2.
    """
    duration = max(rt_x, rt_y) if duration is None else duration
    _check_decay_args(min(rt_x, rt_y), duration)
    if not (0.0 <= change_time <= duration):
        raise ValidationError(f"change_time {change_time} s outside the {duration} s RIR")
    if not (0.0 <= late_mixing <= 1.0):
        raise ValidationError(f"late_mixing must lie in [0, 1], got {late_mixing}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    g_shared = rng.standard_normal(n)
    g_x_new = rng.standard_normal(n)
    g_y_new = rng.standard_normal(n)

    # Power-preserving crossfade from the shared to the independent field
    # over 2 ms, so the switch itself injects no transient.
    ramp = np.clip((t - change_time) / 0.002, 0.0, 1.0)
    fade = np.sin(ramp * np.pi / 2.0)
    keep = np.sqrt(1.0 - fade * fade)
    m = late_mixing
    g_y_late = m * g_x_new + math.sqrt(1.0 - m * m) * g_y_new
    h_x = decay_envelope(t, rt_x) * (keep * g_shared + fade * g_x_new)
    h_y = decay_envelope(t, rt_y) * (keep * g_shared + fade * g_y_late)

    truth = PairTruth(
        kind="absorption",
        seed=seed,
        sample_rate=sample_rate,
        duration=duration,
        snr_db=snr_db,
        rt=rt_x,
        rt_y=rt_y,
        change_time=change_time,
        late_mixing=late_mixing,
        gamma_ir_target=m * m,
    )
    return _assemble(h_x, h_y, sample_rate, snr_db, rng, truth, "absorption")


SINC_HALF_WIDTH = 16
SINC_KAISER_BETA = 8.0


def _fractional_resample(x: np.ndarray, stretch: float) -> np.ndarray:
    """Evaluate x at positions n*stretch with a Kaiser-windowed sinc kernel.

    Exact identity for stretch = 1. Positions beyond the signal read as
    zero (the decayed tail).
    """
    n = x.size
    positions = np.arange(n) * stretch
    base = np.floor(positions).astype(np.int64)
    frac = positions - base
    offsets = np.arange(-SINC_HALF_WIDTH + 1, SINC_HALF_WIDTH + 1)
    delta = offsets[None, :] - frac[:, None]
    window = np.i0(SINC_KAISER_BETA * np.sqrt(np.clip(1.0 - (delta / SINC_HALF_WIDTH) ** 2, 0.0, 1.0)))
    window /= np.i0(SINC_KAISER_BETA)
    kernel = np.sinc(delta) * window
    idx = base[:, None] + offsets[None, :]
    valid = (idx >= 0) & (idx < n)
    return np.sum(x[np.clip(idx, 0, n - 1)] * kernel * valid, axis=1)


def gen_jitter_pair(
    rt: float,
    sample_rate: int,
    seed: int,
    drift: float,
    duration: Optional[float] = None,
    snr_db: float = 60.0,
) -> SyntheticPair:
    """Pair differing by a tiny progressive time stretch (1 + drift).

    Emulates atmospheric variation: the phase error grows with both
    frequency and elapsed time, so decorrelation rises toward late
    samples and high bands.
    """
    if abs(drift) > MAX_JITTER_DRIFT:
        raise ValidationError(f"|drift| must be <= {MAX_JITTER_DRIFT:g}, got {drift}")
    duration = rt if duration is None else duration
    _check_decay_args(rt, duration)
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    h_x = decay_envelope(t, rt) * rng.standard_normal(n)
    h_y = h_x if drift == 0.0 else _fractional_resample(h_x, 1.0 + drift)
    truth = PairTruth(
        kind="jitter",
        seed=seed,
        sample_rate=sample_rate,
        duration=duration,
        snr_db=snr_db,
        rt=rt,
        drift=drift,
    )
    return _assemble(h_x, np.asarray(h_y, dtype=np.float64), sample_rate, snr_db, rng, truth, "jitter")


#: Generator registry for the CLI `synth` subcommand.
GENERATORS = {
    "mixing": gen_mixing_pair,
    "occlusion": gen_occluded_pair,
    "absorption": gen_absorption_change_pair,
    "jitter": gen_jitter_pair,
}
