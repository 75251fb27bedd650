"""The four figure kinds and their CSV readers.

Inputs are the simulator's documented CSV schemas:

* per-probe results  ``row,t_on_ns,sidedness,temp_c,acmin,reps,flips``
* sweep summary      ``t_on_ns,mean,min,max``
* PoC summary        ``label,num_reads,order,flipped_rows,flips``

Rendering is deterministic: fixed figure geometry, fixed dpi, and a fixed
PNG metadata block, so identical inputs give identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIGURE_KINDS = (
    "acmin-distribution",   # box plot of per-row acmin per open time
    "acmin-sweep",          # log-log mean curve with min/max band
    "sidedness-difference", # single minus double acmin vs open time
    "poc-bars",             # flip counts per PoC variant
)

_PNG_METADATA = {"Software": "rowsim-plots"}
_FIGSIZE = (6.4, 4.2)
_DPI = 110


class PlotError(ValueError):
    """Missing input, missing column, or empty data."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: dict = field(default_factory=dict)  # role -> csv path
    output: str = "figure.png"
    title: str = ""

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise PlotError(
                f"unknown figure kind {self.kind!r}; one of {', '.join(FIGURE_KINDS)}")


def _read_csv(path, required_columns) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise PlotError(f"input {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required_columns if c not in header]
        if missing:
            raise PlotError(f"{path}: missing columns {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


def _require_input(spec: FigureSpec, role: str) -> str:
    if role not in spec.inputs:
        raise PlotError(f"figure {spec.kind!r} needs input {role!r}")
    return spec.inputs[role]


def _new_axes(title):
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    if title:
        ax.set_title(title)
    return fig, ax


def _render_distribution(spec: FigureSpec):
    rows = _read_csv(_require_input(spec, "results"), ("t_on_ns", "acmin"))
    by_t: dict[float, list[float]] = {}
    for r in rows:
        by_t.setdefault(float(r["t_on_ns"]), []).append(float(r["acmin"]))
    t_values = sorted(by_t)
    fig, ax = _new_axes(spec.title or "Per-row minimum activation count")
    ax.boxplot([by_t[t] for t in t_values],
               tick_labels=[f"{t:g}" for t in t_values])
    ax.set_xlabel("row-open time (ns)")
    ax.set_ylabel("activations to first flip")
    ax.set_yscale("log")
    return fig


def _render_sweep(spec: FigureSpec):
    rows = _read_csv(_require_input(spec, "summary"),
                     ("t_on_ns", "mean", "min", "max"))
    rows.sort(key=lambda r: float(r["t_on_ns"]))
    t = [float(r["t_on_ns"]) for r in rows]
    mean = [float(r["mean"]) for r in rows]
    lo = [float(r["min"]) for r in rows]
    hi = [float(r["max"]) for r in rows]
    fig, ax = _new_axes(spec.title or "Minimum activation count vs row-open time")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.fill_between(t, lo, hi, alpha=0.25, color="tab:blue", linewidth=0)
    ax.plot(t, mean, marker="o", color="tab:blue", label="mean (min/max band)")
    # reference: a single activation suffices below this line
    ax.axhline(1.0, color="red", linestyle="--", linewidth=1,
               label="1 activation")
    ax.set_xlabel("row-open time (ns)")
    ax.set_ylabel("activations to first flip")
    ax.legend(loc="lower left")
    return fig


def _render_difference(spec: FigureSpec):
    single = _read_csv(_require_input(spec, "single"), ("t_on_ns", "mean"))
    double = _read_csv(_require_input(spec, "double"), ("t_on_ns", "mean"))
    d_mean = {float(r["t_on_ns"]): float(r["mean"]) for r in double}
    t, diff = [], []
    for r in sorted(single, key=lambda r: float(r["t_on_ns"])):
        t_on = float(r["t_on_ns"])
        if t_on not in d_mean:
            raise PlotError(f"t_on {t_on:g} ns present only in the single-sided summary")
    for r in sorted(single, key=lambda r: float(r["t_on_ns"])):
        t_on = float(r["t_on_ns"])
        t.append(t_on)
        diff.append(float(r["mean"]) - d_mean[t_on])
    fig, ax = _new_axes(spec.title or "Single-sided minus double-sided")
    ax.set_xscale("log")
    ax.axhline(0.0, color="gray", linewidth=1)
    ax.plot(t, diff, marker="o", color="tab:orange")
    ax.set_xlabel("row-open time (ns)")
    ax.set_ylabel("difference in activations to first flip")
    return fig


def _render_poc_bars(spec: FigureSpec):
    rows = _read_csv(_require_input(spec, "poc"), ("label", "flips",
                                                   "flipped_rows"))
    labels = [r["label"] for r in rows]
    flips = [int(r["flips"]) for r in rows]
    flipped_rows = [int(r["flipped_rows"]) for r in rows]
    fig, ax = _new_axes(spec.title or "Demonstration-program flip counts")
    x = range(len(labels))
    ax.bar([i - 0.2 for i in x], flips, width=0.4, label="bit flips",
           color="tab:blue")
    ax.bar([i + 0.2 for i in x], flipped_rows, width=0.4,
           label="rows with flips", color="tab:orange")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("count")
    ax.legend()
    return fig


_RENDERERS = {
    "acmin-distribution": _render_distribution,
    "acmin-sweep": _render_sweep,
    "sidedness-difference": _render_difference,
    "poc-bars": _render_poc_bars,
}


def render(spec: FigureSpec) -> Path:
    """Render the figure and write it to ``spec.output``; returns the path.
    Raises PlotError before writing anything if inputs are missing/empty."""
    fig = _RENDERERS[spec.kind](spec)
    out = Path(spec.output)
    try:
        fig.tight_layout()
        fig.savefig(out, format=out.suffix.lstrip(".") or "png",
                    metadata=_PNG_METADATA if out.suffix in ("", ".png") else None)
    finally:
        plt.close(fig)
    return out
