"""Quantify acoustic-environment changes between repeated RIR measurements.

Short-time coherence between pairs of room impulse responses, decomposed
into an environment-change part and the loss expected from decay against
stationary noise, condensed into a frequency-dependent sensitivity
rating over the high-SNR region.
"""

from ._kernels import backend as kernel_backend
from .coherence import (
    environment_coherence,
    expected_coherence,
    median_coherence,
    short_time_coherence,
    tf_coherence,
)
from .dsp import (
    BandSignal,
    StftGrid,
    analytic_signal,
    band_demodulate,
    detect_onset,
    energy_envelope,
    estimate_noise_floor,
    estimate_rt,
    short_time_average,
    stft,
)
from .errors import (
    AnalysisError,
    ConfigError,
    InputTooShortError,
    InsufficientDecayError,
    ManifestError,
    NoiseTailError,
    NoUsableRegionError,
    PairingError,
    RirSenseError,
    ValidationError,
    WavFormatError,
)
from .ingestion import (
    AbsorptionEntry,
    SessionManifest,
    build_pairs,
    equivalent_absorption_area,
    load_manifest,
    load_wav,
    write_wav,
)
from .pipeline import analyze_pair_tf, stft_envelopes
from .sensitivity import (
    DEFAULT_BANDS,
    BandFailure,
    analyze_band,
    band_sweep,
    linear_bands,
    median_sensitivity,
    sensitivity_rating,
    snr_truncation_index,
    tf_sensitivity,
)
from .synth import (
    GENERATORS,
    OcclusionSpec,
    PairTruth,
    SyntheticPair,
    gen_absorption_change_pair,
    gen_decaying_rir,
    gen_jitter_pair,
    gen_mixing_pair,
    gen_occluded_pair,
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

__version__ = "0.1.0"
