"""Session ingestion: WAV loading, manifest parsing, pair formation.

A session manifest is a single human-editable text file with top-level
``key = value`` lines followed by table sections. Grammar (version 1):

    # comment lines start with '#'; blank lines are ignored
    schema = 1
    pairing = reference-vs-rest        # or: consecutive | explicit

    [entries]
    # columns: file  channel  source  receiver  condition  index
    "take 1.wav"  0  S1  R1  cond_a  1
    take2.wav     0  S1  R1  cond_a  2

    [absorption cond_a]
    # columns: surface  alpha  area_m2
    panels  0.35  12.5

    [pairs]                            # explicit mode only
    # columns: ref_key  other_key   (keys are condition:receiver:index)
    cond_a:R1:1  cond_a:R1:2

    [noise take2.wav]                  # optional per-file overrides
    start_s = 1.8
    end_s = 2.0
    # or:  energy = 1.5e-9   /   truncated = true

Fields may be quoted (shlex rules). Unknown keys and sections are
ignored with a warning, never silently dropped. File paths resolve
relative to the manifest location and must exist at load time.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.io.wavfile

from .errors import ManifestError, PairingError, ValidationError, WavFormatError
from .types import Rir

__all__ = [
    "AbsorptionEntry",
    "ManifestEntry",
    "NoiseOverride",
    "SessionManifest",
    "Pair",
    "load_manifest",
    "load_wav",
    "write_wav",
    "build_pairs",
    "equivalent_absorption_area",
]

SCHEMA_VERSION = 1
PAIRING_MODES = ("reference-vs-rest", "consecutive", "explicit")
# Analysis parameters a manifest may set; command-line flags take precedence.
ANALYSIS_KEYS = ("window_ms", "snr_threshold_db", "stft_window", "stft_hop", "guard_epsilon")

# Integer PCM scaling: symmetric-negative convention (divide by 2^(bits-1)).
_PCM_SCALE = {np.dtype(np.int16): 2**15, np.dtype(np.int32): 2**31}


@dataclass(frozen=True)
class AbsorptionEntry:
    """One absorbing surface: coefficient alpha over area m^2."""

    surface: str
    alpha: float
    area_m2: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"absorption coefficient must lie in [0, 1], got {self.alpha}")
        if self.area_m2 <= 0:
            raise ValidationError(f"surface area must be positive, got {self.area_m2}")


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    channel: int
    source: str
    receiver: str
    condition: str
    index: int

    @property
    def key(self) -> str:
        return f"{self.condition}:{self.receiver}:{self.index}"


@dataclass(frozen=True)
class NoiseOverride:
    segment: Optional[Tuple[float, float]] = None
    energy: Optional[float] = None
    truncated: bool = False


@dataclass
class SessionManifest:
    """Declarative description of a measurement session."""

    entries: List[ManifestEntry]
    pairing_mode: str
    base_dir: Path
    absorption: Dict[str, List[AbsorptionEntry]] = field(default_factory=dict)
    noise: Dict[str, NoiseOverride] = field(default_factory=dict)
    explicit_pairs: List[Tuple[str, str]] = field(default_factory=list)
    config: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def resolve(self, entry: ManifestEntry) -> Path:
        return (self.base_dir / entry.file).resolve()


class Pair(NamedTuple):
    """An analysis pair: reference and comparison recordings plus their keys."""

    reference: Rir
    comparison: Rir
    reference_key: str
    comparison_key: str


def load_wav(path, channel: int = 0) -> Rir:
    """Load one channel of a WAV file as a Rir.

    Integer PCM (16/24/32-bit) is scaled to [-1, 1] by 2^(bits-1);
    float data passes through unchanged. The sample rate comes from the
    header.
    """
    path = Path(path)
    if not path.exists():
        raise WavFormatError(f"WAV file not found: {path}")
    try:
        rate, data = scipy.io.wavfile.read(str(path))
    except Exception as exc:
        raise WavFormatError(f"cannot decode {path}: {exc}") from exc
    if data.ndim == 1:
        n_channels = 1
        column = data
    else:
        n_channels = data.shape[1]
        column = None
    if not (0 <= channel < n_channels):
        raise WavFormatError(f"{path} has {n_channels} channel(s); channel {channel} requested")
    if column is None:
        column = data[:, channel]
    if data.dtype in _PCM_SCALE:
        samples = column.astype(np.float64) / _PCM_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (column.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.dtype(np.float32), np.dtype(np.float64)):
        samples = column.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    try:
        return Rir(sample_rate=int(rate), samples=samples, channel_id=str(channel))
    except ValidationError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc


def write_wav(path, rir: Rir) -> None:
    """Write a Rir as a 64-bit float WAV (lossless round trip)."""
    scipy.io.wavfile.write(str(path), rir.sample_rate, rir.samples.astype(np.float64))


def _parse_kv(line: str):
    key, _, value = line.partition("=")
    return key.strip(), value.strip()


def _parse_bool(value: str) -> bool:
    return value.strip().lower() in {"1", "true", "yes", "on"}


def load_manifest(path) -> SessionManifest:
    """Parse and validate a session manifest file."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    manifest = SessionManifest(entries=[], pairing_mode="reference-vs-rest", base_dir=path.parent)
    schema = None
    section: Optional[List[str]] = None  # [kind, *args]
    noise_kv: Dict[str, Dict[str, str]] = {}

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        def fail(msg: str):
            raise ManifestError(f"{path}:{lineno}: {msg}")

        if line.startswith("[") and line.endswith("]"):
            header = shlex.split(line[1:-1])
            if not header:
                fail("empty section header")
            kind = header[0]
            if kind == "entries" and len(header) == 1:
                section = ["entries"]
            elif kind == "absorption" and len(header) == 2:
                section = ["absorption", header[1]]
            elif kind == "pairs" and len(header) == 1:
                section = ["pairs"]
            elif kind == "noise" and len(header) == 2:
                section = ["noise", header[1]]
            else:
                manifest.warnings.append(f"line {lineno}: unknown section {line!r} ignored")
                section = ["ignored"]
            continue

        if section is None:
            if "=" not in line:
                fail(f"expected 'key = value', got {line!r}")
            key, value = _parse_kv(line)
            if key == "schema":
                schema = value
            elif key == "pairing":
                if value not in PAIRING_MODES:
                    fail(f"unknown pairing mode {value!r}; expected one of {PAIRING_MODES}")
                manifest.pairing_mode = value
            elif key in ANALYSIS_KEYS:
                try:
                    manifest.config[key] = float(value)
                except ValueError:
                    fail(f"{key} must be numeric, got {value!r}")
            else:
                manifest.warnings.append(f"line {lineno}: unknown key {key!r} ignored")
            continue

        kind = section[0]
        if kind == "entries":
            fields = shlex.split(line, comments=True)
            if len(fields) != 6:
                fail(f"entry rows need 6 columns (file channel source receiver condition index), got {len(fields)}")
            try:
                entry = ManifestEntry(
                    file=fields[0],
                    channel=int(fields[1]),
                    source=fields[2],
                    receiver=fields[3],
                    condition=fields[4],
                    index=int(fields[5]),
                )
            except ValueError as exc:
                fail(str(exc))
            manifest.entries.append(entry)
        elif kind == "absorption":
            fields = shlex.split(line, comments=True)
            if len(fields) != 3:
                fail(f"absorption rows need 3 columns (surface alpha area_m2), got {len(fields)}")
            try:
                item = AbsorptionEntry(surface=fields[0], alpha=float(fields[1]), area_m2=float(fields[2]))
            except (ValueError, ValidationError) as exc:
                fail(str(exc))
            manifest.absorption.setdefault(section[1], []).append(item)
        elif kind == "pairs":
            fields = shlex.split(line, comments=True)
            if len(fields) != 2:
                fail(f"pair rows need 2 columns (ref_key other_key), got {len(fields)}")
            manifest.explicit_pairs.append((fields[0], fields[1]))
        elif kind == "noise":
            if "=" not in line:
                fail(f"expected 'key = value' inside [noise], got {line!r}")
            key, value = _parse_kv(line)
            noise_kv.setdefault(section[1], {})[key] = value
        # kind == "ignored": skip rows of unknown sections

    if schema is None:
        raise ManifestError(f"{path}: missing required 'schema' field")
    if schema != str(SCHEMA_VERSION):
        raise ManifestError(f"{path}: unsupported schema version {schema!r} (supported: {SCHEMA_VERSION})")
    if not manifest.entries:
        raise ManifestError(f"{path}: no [entries] rows")

    for file, kv in noise_kv.items():
        segment = None
        if "start_s" in kv or "end_s" in kv:
            if not ("start_s" in kv and "end_s" in kv):
                raise ManifestError(f"{path}: [noise {file}] needs both start_s and end_s")
            segment = (float(kv.pop("start_s")), float(kv.pop("end_s")))
        energy = float(kv.pop("energy")) if "energy" in kv else None
        truncated = _parse_bool(kv.pop("truncated", "false"))
        for key in kv:
            manifest.warnings.append(f"[noise {file}]: unknown key {key!r} ignored")
        manifest.noise[file] = NoiseOverride(segment=segment, energy=energy, truncated=truncated)

    seen: Dict[Tuple[str, str, int], ManifestEntry] = {}
    for entry in manifest.entries:
        spot = (entry.condition, entry.receiver, entry.index)
        if spot in seen:
            raise ManifestError(f"{path}: duplicate measurement index {entry.key}")
        seen[spot] = entry
        resolved = manifest.resolve(entry)
        if not resolved.exists():
            raise ManifestError(f"{path}: file not found: {resolved}")
    return manifest


def _load_entry(manifest: SessionManifest, entry: ManifestEntry, cache: dict) -> Rir:
    cache_key = (entry.file, entry.channel)
    if cache_key not in cache:
        rir = load_wav(manifest.resolve(entry), entry.channel)
        cache[cache_key] = rir
    rir = cache[cache_key]
    return replace(
        rir,
        source_id=entry.source,
        receiver_id=entry.receiver,
        condition_id=entry.condition,
    )


def build_pairs(manifest: SessionManifest) -> Tuple[List[Pair], List[str]]:
    """Form analysis pairs according to the manifest's pairing mode.

    reference-vs-rest pairs the lowest-index measurement of each
    (condition, receiver) group with every other one; consecutive pairs
    neighbours (k, k+1); explicit passes the listed pairs through.
    Groups with a single measurement yield no pairs plus a warning. The
    output order is deterministic: sorted by (condition, receiver,
    comparison index).
    """
    warnings: List[str] = []
    cache: dict = {}
    by_key = {entry.key: entry for entry in manifest.entries}

    def make_pair(ref: ManifestEntry, other: ManifestEntry) -> Pair:
        a = _load_entry(manifest, ref, cache)
        b = _load_entry(manifest, other, cache)
        if a.sample_rate != b.sample_rate:
            raise PairingError(
                f"sample-rate mismatch within pair {ref.key} / {other.key}: "
                f"{a.sample_rate} vs {b.sample_rate} Hz (resampling is not performed)"
            )
        return Pair(a, b, ref.key, other.key)

    pairs: List[Pair] = []
    if manifest.pairing_mode == "explicit":
        for ref_key, other_key in manifest.explicit_pairs:
            for key in (ref_key, other_key):
                if key not in by_key:
                    raise ManifestError(f"explicit pair references unknown key {key!r}")
            pairs.append(make_pair(by_key[ref_key], by_key[other_key]))
        return pairs, warnings

    groups: Dict[Tuple[str, str], List[ManifestEntry]] = {}
    for entry in manifest.entries:
        groups.setdefault((entry.condition, entry.receiver), []).append(entry)
    for (condition, receiver) in sorted(groups):
        members = sorted(groups[(condition, receiver)], key=lambda e: e.index)
        if len(members) < 2:
            warnings.append(
                f"condition {condition!r} receiver {receiver!r} has a single measurement; no pairs formed"
            )
            continue
        if manifest.pairing_mode == "reference-vs-rest":
            reference = members[0]
            for other in members[1:]:
                pairs.append(make_pair(reference, other))
        else:  # consecutive
            for first, second in zip(members, members[1:]):
                pairs.append(make_pair(first, second))
    return pairs, warnings


def equivalent_absorption_area(entries: Sequence[AbsorptionEntry]) -> float:
    """Room equivalent absorption area: sum of alpha_i * S_i."""
    return float(sum(e.alpha * e.area_m2 for e in entries))
