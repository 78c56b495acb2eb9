"""Command-line front end: manifest in, machine-readable CSV out.

Subcommands: coherence, sensitivity, tfmap, synth, report. All numeric
CSV fields are written with full round-trip precision and LF newlines,
so identical invocations produce byte-identical files. Exit codes:
0 success, 1 usage error, 2 input/data error, 3 analysis error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from ._kernels import backend as kernel_backend
from .dsp import DECIMATED_RATE_FACTOR
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
    SessionManifest,
    build_pairs,
    load_manifest,
    write_wav,
)
from .pipeline import analyze_pair_tf
from .sensitivity import (
    DEFAULT_BANDS,
    BandFailure,
    NoiseSpec,
    analyze_band,
    band_sweep,
)
from .synth import (
    OcclusionSpec,
    gen_absorption_change_pair,
    gen_decaying_rir,
    gen_jitter_pair,
    gen_mixing_pair,
    gen_occluded_pair,
)
from .types import AnalysisConfig, BandSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_ANALYSIS = 3

_USAGE_ERRORS = (ConfigError,)
_INPUT_ERRORS = (ManifestError, WavFormatError, ValidationError, InputTooShortError, NoiseTailError, OSError)
_ANALYSIS_ERRORS = (PairingError, NoUsableRegionError, AnalysisError, InsufficientDecayError)

SYNTH_GENERATORS = ("decay", "mixing", "occlusion", "absorption", "jitter")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; remap to the exit-code contract.
    def error(self, message):
        raise _UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)  # shortest round-trip representation
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _safe_name(label: str) -> str:
    return "".join(c if (c.isalnum() or c in "._-") else "-" for c in label)


def _effective_config(args, manifest: Optional[SessionManifest]) -> AnalysisConfig:
    """Built-in defaults, overridden by manifest keys, overridden by flags."""
    defaults = AnalysisConfig()
    values = {
        "avg_window": defaults.avg_window,
        "snr_threshold_db": defaults.snr_threshold_db,
        "stft_window_len": defaults.stft_window_len,
        "stft_hop": defaults.stft_hop,
        "guard_epsilon": defaults.guard_epsilon,
    }
    if manifest is not None:
        m = manifest.config
        if "window_ms" in m:
            values["avg_window"] = m["window_ms"] / 1e3
        if "snr_threshold_db" in m:
            values["snr_threshold_db"] = m["snr_threshold_db"]
        if "stft_window" in m:
            values["stft_window_len"] = int(m["stft_window"])
        if "stft_hop" in m:
            values["stft_hop"] = int(m["stft_hop"])
        if "guard_epsilon" in m:
            values["guard_epsilon"] = m["guard_epsilon"]
    if getattr(args, "window_ms", None) is not None:
        values["avg_window"] = args.window_ms / 1e3
    if getattr(args, "snr_threshold_db", None) is not None:
        values["snr_threshold_db"] = args.snr_threshold_db
    if getattr(args, "stft_window", None) is not None:
        values["stft_window_len"] = args.stft_window
    if getattr(args, "stft_hop", None) is not None:
        values["stft_hop"] = args.stft_hop
    if getattr(args, "guard_epsilon", None) is not None:
        values["guard_epsilon"] = args.guard_epsilon
    try:
        return AnalysisConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def parse_bands(spec: Optional[str]) -> List[Optional[BandSpec]]:
    """Band list from a flag value.

    'default' expands to the 19 one-kHz bands centred 1..19 kHz;
    otherwise a comma-separated list of 'center', 'center/bandwidth' (Hz)
    or 'broadband'.
    """
    if spec is None:
        return list(DEFAULT_BANDS)
    bands: List[Optional[BandSpec]] = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "default":
            bands.extend(DEFAULT_BANDS)
            continue
        if token == "broadband":
            bands.append(None)
            continue
        center, _, bandwidth = token.partition("/")
        try:
            bands.append(BandSpec(center=float(center), bandwidth=float(bandwidth) if bandwidth else 1000.0))
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"bad band token {token!r}: {exc}") from exc
    if not bands:
        raise ConfigError(f"no bands in {spec!r}")
    return bands


def _band_column(band: Optional[BandSpec]) -> str:
    return "broadband" if band is None else _fmt(band.center)


def _noise_spec(manifest: SessionManifest, file: str) -> Optional[NoiseSpec]:
    override = manifest.noise.get(file)
    if override is None:
        return None
    return NoiseSpec(energy=override.energy, segment=override.segment, truncated=override.truncated)


def _report(out_dir: Path, command: str, config: AnalysisConfig, payload: dict, started: float) -> None:
    report = {
        "tool": "rirsense",
        "version": __version__,
        "command": command,
        "kernel_backend": kernel_backend(),
        "config": {
            "window_ms": config.avg_window * 1e3,
            "snr_threshold_db": config.snr_threshold_db,
            "stft_window": config.stft_window_len,
            "stft_hop": config.stft_hop,
            "guard_epsilon": config.guard_epsilon,
        },
        **payload,
        "timing_s": round(time.perf_counter() - started, 3),
    }
    with open(out_dir / "report.json", "w", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def _pair_noise_specs(manifest, manifest_entries_by_key, pair):
    ref_entry = manifest_entries_by_key[pair.reference_key]
    other_entry = manifest_entries_by_key[pair.comparison_key]
    return _noise_spec(manifest, ref_entry.file), _noise_spec(manifest, other_entry.file)


def cmd_coherence(args) -> int:
    started = time.perf_counter()
    manifest = load_manifest(args.manifest)
    config = _effective_config(args, manifest)
    band = None
    if args.band is not None and args.band != "broadband":
        bands = parse_bands(args.band)
        if len(bands) != 1:
            raise ConfigError("coherence takes a single --band")
        band = bands[0]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, warnings = build_pairs(manifest)
    if not pairs:
        raise AnalysisError("manifest yields no pairs; " + "; ".join(warnings or ["add measurements"]))
    by_key = {e.key: e for e in manifest.entries}

    def run_pair(pair):
        noise_ref, noise_other = _pair_noise_specs(manifest, by_key, pair)
        return analyze_band(
            pair.reference, pair.comparison, band, config, noise_x=noise_ref, noise_y=noise_other
        )

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            analyses = list(pool.map(run_pair, pairs))
    else:
        analyses = [run_pair(pair) for pair in pairs]

    rows_summary = []
    for pair, analysis in zip(pairs, analyses):
        name = f"coherence_{_safe_name(pair.reference_key)}__vs__{_safe_name(pair.comparison_key)}.csv"
        measured, expected, environment = analysis.measured, analysis.expected, analysis.environment
        rows = zip(
            measured.times,
            measured.gamma,
            expected.gamma,
            environment.gamma,
            (measured.defined).astype(int),
        )
        _write_csv(out_dir / name, ["time_s", "gamma", "gamma_expected", "gamma_ir", "defined_flag"], rows)
        rows_summary.append(
            {
                "reference": pair.reference_key,
                "comparison": pair.comparison_key,
                "csv": name,
                "gamma_rating": analysis.rating.gamma_rating,
                "truncation_s": float(measured.times[analysis.rating.truncation_index]),
                "onset_s": float(measured.times[analysis.onset_index]),
            }
        )
        print(f"{name}: gamma_rating={analysis.rating.gamma_rating:.6g}")
    _report(
        out_dir,
        "coherence",
        config,
        {"band": _band_column(band), "pairs": rows_summary, "warnings": warnings + manifest.warnings},
        started,
    )
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    started = time.perf_counter()
    manifest = load_manifest(args.manifest)
    config = _effective_config(args, manifest)
    bands = parse_bands(args.bands)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, warnings = build_pairs(manifest)
    if not pairs:
        raise AnalysisError("manifest yields no pairs; " + "; ".join(warnings or ["add measurements"]))
    by_key = {e.key: e for e in manifest.entries}

    def run_pair(pair):
        noise_ref, noise_other = _pair_noise_specs(manifest, by_key, pair)
        return band_sweep(
            pair.reference, pair.comparison, bands, config, noise_x=noise_ref, noise_y=noise_other
        )

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            sweeps = list(pool.map(run_pair, pairs))
    else:
        sweeps = [run_pair(pair) for pair in pairs]

    rows = []
    medians: Dict[tuple, List[float]] = {}
    n_ok = 0
    for pair, sweep in zip(pairs, sweeps):
        condition = by_key[pair.comparison_key].condition
        pair_label = f"{pair.reference_key}__vs__{pair.comparison_key}"
        for result in sweep:
            if isinstance(result, BandFailure):
                rows.append(
                    (condition, pair_label, _band_column(result.band), float("nan"), float("nan"),
                     "no-usable-region")
                )
                continue
            n_ok += 1
            truncation_s = result.truncation_index / _band_rate(result.band, pair.reference.sample_rate)
            rows.append(
                (condition, pair_label, _band_column(result.band), result.gamma_rating, truncation_s, "ok")
            )
            medians.setdefault((condition, _band_column(result.band)), []).append(result.gamma_rating)
    _write_csv(
        out_dir / "sensitivity.csv",
        ["condition_id", "pair_id", "band_center_hz", "gamma_rating", "truncation_s", "status"],
        rows,
    )
    median_rows = [
        (condition, band, float(np.median(values)), len(values))
        for (condition, band), values in sorted(medians.items())
    ]
    _write_csv(
        out_dir / "sensitivity_medians.csv",
        ["condition_id", "band_center_hz", "gamma_rating_median", "n_pairs"],
        median_rows,
    )
    print(f"sensitivity.csv: {len(rows)} rows ({n_ok} ok), {len(median_rows)} condition/band medians")
    _report(
        out_dir,
        "sensitivity",
        config,
        {
            "bands": [_band_column(b) for b in bands],
            "n_pairs": len(pairs),
            "n_rows_ok": n_ok,
            "warnings": warnings + manifest.warnings,
        },
        started,
    )
    if n_ok == 0:
        raise AnalysisError("no band of any pair had a usable region")
    return EXIT_OK


def _band_rate(band: Optional[BandSpec], sample_rate: int) -> float:
    if band is None:
        return float(sample_rate)
    decim = max(1, int(sample_rate // (DECIMATED_RATE_FACTOR * band.bandwidth)))
    return sample_rate / decim


def cmd_tfmap(args) -> int:
    started = time.perf_counter()
    manifest = load_manifest(args.manifest)
    config = _effective_config(args, manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, warnings = build_pairs(manifest)
    if not pairs:
        raise AnalysisError("manifest yields no pairs")
    if len(pairs) > 1 and args.pair_index is None:
        raise ConfigError(f"manifest yields {len(pairs)} pairs; select one with --pair-index")
    pair = pairs[args.pair_index if args.pair_index is not None else 0]
    analysis = analyze_pair_tf(pair.reference, pair.comparison, config)
    tf_map = analysis.map
    rows = (
        (tf_map.times[i], tf_map.freqs[j], tf_map.gamma[i, j])
        for i in range(tf_map.times.size)
        for j in range(tf_map.freqs.size)
    )
    _write_csv(out_dir / "tfmap.csv", ["time_s", "freq_hz", "gamma"], rows)
    gamma_rows = [
        (tf_map.freqs[j], analysis.gamma_by_freq[j],
         "ok" if not math.isnan(analysis.gamma_by_freq[j]) else "no-usable-region")
        for j in range(tf_map.freqs.size)
    ]
    _write_csv(out_dir / "tf_sensitivity.csv", ["freq_hz", "gamma_rating", "status"], gamma_rows)
    print(
        f"tfmap.csv: {tf_map.times.size} frames x {tf_map.freqs.size} bins; "
        f"tf_sensitivity.csv: {len(gamma_rows)} rows"
    )
    _report(
        out_dir,
        "tfmap",
        config,
        {
            "pair": [pair.reference_key, pair.comparison_key],
            "n_frames": int(tf_map.times.size),
            "n_bins": int(tf_map.freqs.size),
            "onset_frame": analysis.onset_frame,
            "warnings": warnings + manifest.warnings,
        },
        started,
    )
    return EXIT_OK


_SYNTH_MANIFEST = """\
# generated by rirsense synth
schema = 1
pairing = explicit

[entries]
# file channel source receiver condition index
x.wav 0 S R {kind} 1
y.wav 0 S R {kind} 2

[pairs]
{kind}:R:1 {kind}:R:2
"""

_SYNTH_MANIFEST_SINGLE = """\
# generated by rirsense synth
schema = 1
pairing = reference-vs-rest

[entries]
rir.wav 0 S R {kind} 1
"""


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = args.generator
    if kind == "decay":
        rir = gen_decaying_rir(args.rt, args.fs, args.duration or args.rt, args.seed)
        write_wav(out_dir / "rir.wav", rir)
        (out_dir / "session.manifest").write_text(_SYNTH_MANIFEST_SINGLE.format(kind=kind))
        truth = {"kind": "decay", "rt": args.rt, "seed": args.seed, "sample_rate": args.fs}
    else:
        if kind == "mixing":
            pair = gen_mixing_pair(args.a, args.rt, args.fs, args.snr, args.seed, duration=args.duration)
        elif kind == "occlusion":
            occ = OcclusionSpec(
                start=args.occlusion_start,
                length=args.occlusion_length,
                attenuation_db=args.occlusion_attenuation_db,
            )
            pair = gen_occluded_pair(
                args.rt, args.fs, args.seed, occlusion=occ, duration=args.duration, snr_db=args.snr
            )
        elif kind == "absorption":
            pair = gen_absorption_change_pair(
                args.rt,
                args.rt_y if args.rt_y is not None else args.rt,
                args.change_time,
                args.fs,
                args.seed,
                duration=args.duration,
                snr_db=args.snr,
                late_mixing=args.late_mixing,
            )
        elif kind == "jitter":
            pair = gen_jitter_pair(
                args.rt, args.fs, args.seed, args.drift, duration=args.duration, snr_db=args.snr
            )
        else:  # argparse choices guard this; keep the contract explicit
            raise _UsageError(f"unknown generator {kind!r}; available: {', '.join(SYNTH_GENERATORS)}")
        write_wav(out_dir / "x.wav", pair.x)
        write_wav(out_dir / "y.wav", pair.y)
        (out_dir / "session.manifest").write_text(_SYNTH_MANIFEST.format(kind=kind))
        truth = pair.truth.to_dict()
    with open(out_dir / "truth.json", "w", newline="\n") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    print(f"wrote {kind} fixture to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    if not path.exists():
        raise ManifestError(f"no report found at {path}")
    report = json.loads(path.read_text())
    print(f"{report.get('tool', '?')} {report.get('version', '?')} -- {report.get('command', '?')}")
    print(f"kernel backend: {report.get('kernel_backend', '?')}")
    for key, value in report.get("config", {}).items():
        print(f"  {key} = {value}")
    for key in ("band", "bands", "pair", "n_pairs", "n_rows_ok", "n_frames", "n_bins"):
        if key in report:
            print(f"{key}: {report[key]}")
    for pair in report.get("pairs", []):
        print(
            f"  {pair['reference']} vs {pair['comparison']}: "
            f"gamma_rating={pair['gamma_rating']:.6g} truncation={pair['truncation_s']:.4f}s"
        )
    for warning in report.get("warnings", []):
        print(f"warning: {warning}")
    print(f"timing: {report.get('timing_s', '?')} s")
    return EXIT_OK


def _add_common_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="session manifest file")
    p.add_argument("--out-dir", required=True, help="output directory for CSVs and the report")
    p.add_argument("--window-ms", type=float, default=None, help="short-time window (default 10 ms)")
    p.add_argument("--snr-threshold-db", type=float, default=None, help="usable-region SNR bound (default 30)")
    p.add_argument("--stft-window", type=int, default=None, help="STFT window length in samples (default 512)")
    p.add_argument("--stft-hop", type=int, default=None, help="STFT hop in samples (default 128)")
    p.add_argument("--guard-epsilon", type=float, default=None, help="undefined-coherence floor (default 1e-12)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for pair fan-out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rirsense", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rirsense {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("coherence", help="measured/expected/environment coherence curves per pair")
    _add_common_analysis_flags(p)
    p.add_argument("--band", default=None, help="'broadband' (default) or CENTER[/BANDWIDTH] in Hz")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("sensitivity", help="sensitivity rating per pair and band, plus condition medians")
    _add_common_analysis_flags(p)
    p.add_argument(
        "--bands",
        default=None,
        help="'default' (19 x 1 kHz bands, 1..19 kHz), or comma list of CENTER[/BANDWIDTH] and 'broadband'",
    )
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("tfmap", help="time-frequency coherence map and per-bin sensitivity for one pair")
    _add_common_analysis_flags(p)
    p.add_argument("--pair-index", type=int, default=None, help="pair to analyse when the manifest yields several")
    p.set_defaults(func=cmd_tfmap)

    p = sub.add_parser("synth", help="write a synthetic fixture (WAV pair + manifest + truth record)")
    p.add_argument("generator", choices=SYNTH_GENERATORS, help="fixture generator")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fs", type=int, default=48000, help="sample rate (default 48000)")
    p.add_argument("--rt", type=float, default=1.0, help="reverberation time in s (default 1.0)")
    p.add_argument("--duration", type=float, default=None, help="length in s (default rt)")
    p.add_argument("--snr", type=float, default=60.0, help="initial SNR in dB (default 60)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=0.7, help="mixing: amplitude correlation (default 0.7)")
    p.add_argument("--occlusion-start", type=float, default=0.038, help="occlusion: blocked arrival time (s)")
    p.add_argument("--occlusion-length", type=float, default=0.010, help="occlusion: effect span (s)")
    p.add_argument("--occlusion-attenuation-db", type=float, default=30.0)
    p.add_argument("--rt-y", type=float, default=None, help="absorption: RT of the second member (default rt)")
    p.add_argument("--change-time", type=float, default=0.020, help="absorption: shared-to-independent switch (s)")
    p.add_argument("--late-mixing", type=float, default=0.0, help="absorption: residual late correlation in [0,1]")
    p.add_argument("--drift", type=float, default=1e-4, help="jitter: fractional time stretch")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="print the report of a previous run")
    p.add_argument("path", help="output directory or report.json path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _ANALYSIS_ERRORS as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except RirSenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
