"""Figure rendering for the analysis CSV outputs.

Four figure kinds: coherence curve overlays, the sensitivity scatter
with a split linear/log Y axis, band-wise ratings, and time-frequency
heatmaps. Rendering is deterministic for identical inputs (fixed
geometry, fixed hash salt, no timestamps) and never alters or reorders
the data it plots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .csvio import SchemaError, Table, load_table  # noqa: E402

__all__ = ["PlotJob", "render", "KINDS"]

KIND_SCHEMAS = {
    "coherence": "coherence",
    "sensitivity-scatter": "sensitivity",
    "band-gamma": "sensitivity",
    "tf-heatmap": "tfmap",
}
KINDS = tuple(KIND_SCHEMAS)

_RC = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "svg.hashsalt": "rirsense-plots",
}

DEFAULT_SPLIT_THRESHOLD = 0.01


@dataclass(frozen=True)
class PlotJob:
    """One rendering task: input CSV(s) of a known kind to one image."""

    inputs: Tuple[Path, ...]
    kind: str
    output: Path
    options: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KIND_SCHEMAS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "output", Path(self.output))
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.kind != "coherence" and len(self.inputs) > 1:
            raise SchemaError(f"figure kind {self.kind!r} takes a single input CSV")


def render(job: PlotJob) -> List[Table]:
    """Render a job to its output image; returns the loaded tables."""
    tables = [load_table(path, KIND_SCHEMAS[job.kind]) for path in job.inputs]
    job.output.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        fig = plt.figure()
        try:
            if job.kind == "coherence":
                _draw_coherence(fig, tables, job.options)
            elif job.kind == "sensitivity-scatter":
                _draw_sensitivity_scatter(fig, tables[0], job.options)
            elif job.kind == "band-gamma":
                _draw_band_gamma(fig, tables[0], job.options)
            else:
                _draw_tf_heatmap(fig, tables[0], job.options)
            _save(fig, job.output)
        finally:
            plt.close(fig)
    return tables


def _save(fig, output: Path) -> None:
    if output.suffix.lower() == ".svg":
        fig.savefig(output, metadata={"Date": None})
    else:
        fig.savefig(output)


def _draw_coherence(fig, tables: Sequence[Table], options: Dict) -> None:
    ax = fig.add_subplot(111)
    many = len(tables) > 1
    for table in tables:
        suffix = f" [{table.path.stem}]" if many else ""
        ax.plot(table["time_s"], table["gamma"], color="#1f77b4", lw=1.2, label="measured" + suffix)
        ax.plot(table["time_s"], table["gamma_expected"], color="#2ca02c", lw=1.0, ls="--",
                label="expected (decay vs noise)" + suffix)
        ax.plot(table["time_s"], table["gamma_ir"], color="#d62728", lw=1.0, ls=":",
                label="environment" + suffix)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("short-time coherence")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(loc="lower left", frameon=False)
    ax.set_title(options.get("title", "Short-time coherence"))


def _split_axes(fig, values: np.ndarray, threshold: float):
    """Two stacked panels sharing X: linear above threshold, log below."""
    top = fig.add_subplot(2, 1, 1)
    bottom = fig.add_subplot(2, 1, 2, sharex=top)
    finite = values[np.isfinite(values)]
    v_max = float(finite.max()) if finite.size else 1.0
    positive = finite[finite > 0]
    v_min = float(positive.min()) if positive.size else threshold * 1e-3
    top.set_ylim(threshold, max(v_max * 1.1, threshold * 2))
    top.set_yscale("linear")
    bottom.set_yscale("log")
    bottom.set_ylim(min(v_min * 0.5, threshold * 0.5), threshold)
    top.spines.bottom.set_visible(False)
    bottom.spines.top.set_visible(False)
    top.tick_params(labelbottom=False, bottom=False)
    fig.subplots_adjust(hspace=0.06)
    return top, bottom


def _draw_sensitivity_scatter(fig, table: Table, options: Dict) -> None:
    threshold = float(options.get("split_threshold", DEFAULT_SPLIT_THRESHOLD))
    ok = table["status"] == "ok"
    ratings = table["gamma_rating"][ok]
    conditions = list(table["condition_id"][ok])
    order = list(dict.fromkeys(conditions))  # first-appearance order
    x_of = {name: i for i, name in enumerate(order)}
    x = np.array([x_of[c] for c in conditions], dtype=float)

    top, bottom = _split_axes(fig, ratings, threshold)
    for ax in (top, bottom):
        ax.scatter(x, ratings, s=12, color="0.6", label="pairs", clip_on=True)
        for name in order:
            members = ratings[np.array(conditions, dtype=object) == name]
            if members.size:
                ax.scatter([x_of[name]], [np.median(members)], s=28, color="black", zorder=3,
                           label="condition median" if name == order[0] else None)
    bottom.set_xticks(range(len(order)))
    bottom.set_xticklabels(order, rotation=30, ha="right")
    top.set_ylabel("gamma rating (linear)")
    bottom.set_ylabel("gamma rating (log)")
    top.legend(loc="upper right", frameon=False)
    top.set_title(options.get("title", "Sensitivity rating by condition"))


def _draw_band_gamma(fig, table: Table, options: Dict) -> None:
    ax = fig.add_subplot(111)
    ok = table["status"] == "ok"
    numeric = np.array([v != "broadband" for v in table["band_center_hz"]], dtype=bool)
    use = ok & numeric
    centers = np.array([float(v) for v in table["band_center_hz"][use]])
    ratings = table["gamma_rating"][use]
    pairs = table["pair_id"][use]
    for pair in dict.fromkeys(list(pairs)):
        mask = pairs == pair
        ax.plot(centers[mask] / 1e3, ratings[mask], "o-", ms=3.5, lw=0.8, alpha=0.55, label=str(pair))
    for_median: Dict[float, List[float]] = {}
    for center, rating in zip(centers, ratings):
        for_median.setdefault(center, []).append(rating)
    grid = sorted(for_median)
    ax.plot(np.array(grid) / 1e3, [np.median(for_median[c]) for c in grid], "k-", lw=2.0, label="median")
    ax.set_xlabel("band centre (kHz)")
    ax.set_ylabel("gamma rating")
    ax.set_ylim(0, 1.02)
    if len(dict.fromkeys(list(pairs))) <= 6:
        ax.legend(loc="upper left", frameon=False, fontsize=7)
    ax.set_title(options.get("title", "Sensitivity rating by band"))


def _draw_tf_heatmap(fig, table: Table, options: Dict) -> None:
    times = np.unique(table["time_s"])
    freqs = np.unique(table["freq_hz"])
    grid = np.full((times.size, freqs.size), np.nan)
    t_index = {t: i for i, t in enumerate(times)}
    f_index = {f: j for j, f in enumerate(freqs)}
    for t, f, g in zip(table["time_s"], table["freq_hz"], table["gamma"]):
        grid[t_index[t], f_index[f]] = g
    ax = fig.add_subplot(111)
    cmap = matplotlib.colormaps["viridis"].copy()
    cmap.set_bad("#c0c0c0")  # undefined cells rendered distinctly
    mesh = ax.pcolormesh(
        times, freqs / 1e3, np.ma.masked_invalid(grid).T, cmap=cmap, vmin=0.0, vmax=1.0,
        shading="nearest",
    )
    fig.colorbar(mesh, ax=ax, label="short-time coherence")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (kHz)")
    ax.set_title(options.get("title", "Time-frequency coherence"))
