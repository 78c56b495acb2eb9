"""Exception taxonomy shared by all analysis stages.

The CLI maps these onto its exit-code contract: configuration and usage
problems exit 1, input/data problems exit 2, analysis failures exit 3.
"""


class RirSenseError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RirSenseError, ValueError):
    """A domain object was constructed with an invalid field."""


class ConfigError(RirSenseError, ValueError):
    """An analysis parameter is out of its supported range."""


class InputTooShortError(RirSenseError, ValueError):
    """A recording is too short for the requested operation."""


class PairingError(RirSenseError, ValueError):
    """Two inputs cannot be analysed as a pair (band, rate, length or axis mismatch)."""


class NoUsableRegionError(RirSenseError, ValueError):
    """No contiguous region satisfies the SNR threshold from the onset."""


class InsufficientDecayError(RirSenseError, ValueError):
    """The decay range above the noise floor is too small for an RT fit."""


class NoiseTailError(RirSenseError, ValueError):
    """The recording has no usable noise tail; the caller must supply the noise energy."""


class AnalysisError(RirSenseError, ValueError):
    """A computation has no defined result (e.g. every point undefined)."""


class ManifestError(RirSenseError, ValueError):
    """A session manifest is malformed or references missing data."""


class WavFormatError(RirSenseError, ValueError):
    """A WAV file cannot be decoded (unsupported codec, truncation, bad channel)."""
