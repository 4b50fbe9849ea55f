"""Figure rendering: weak-value sweeps, fidelity curves, and tomograms.

Every render writes both PNG and SVG next to the requested output path.
Rendering is read-only and deterministic: a fixed svg hash salt and
suppressed date metadata make reruns on identical CSVs byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "figpipe"

import matplotlib.pyplot as plt

from .schema import SWEEP_COLUMNS, TOMOGRAM_COLUMNS, SweepTable, load_table

FIGURE_KINDS = ("wv_sweep", "fidelity_sweep", "tomogram")

# extracted-point palette, truth is always the black line
_COLORS = ("#c0392b", "#2b5dc0", "#27a05a", "#8e44ad")


@dataclass
class FigureSpec:
    """One figure: input CSVs, kind, output path, and labels."""

    kind: str
    input_csv: list
    output: str
    title: str = ""
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected {FIGURE_KINDS}")
        if not self.input_csv:
            raise ValueError("input_csv must list at least one file")

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        data = json.loads(Path(path).read_text())
        return cls(
            kind=data["kind"],
            input_csv=list(data["input_csv"]),
            output=data["output"],
            title=data.get("title", ""),
            labels=list(data.get("labels", [])),
        )


def _save(fig, output) -> list:
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    png = output.with_suffix(".png")
    svg = output.with_suffix(".svg")
    fig.savefig(png, dpi=150)
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return [png, svg]


def _label(spec: FigureSpec, idx: int, fallback: str) -> str:
    if idx < len(spec.labels):
        return spec.labels[idx]
    return fallback


def _point_series(table: SweepTable):
    """Split a table into (label, rows) per extraction variant."""
    variants = table.extraction_variants()
    return [(v, table.good_rows(extraction=v)) for v in variants]


def render_wv_sweep(spec: FigureSpec, tables: list) -> list:
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 6.4), sharex=True)
    truth_rows = sorted(tables[0].good_rows(), key=lambda r: r["theta_f"])
    theta = [r["theta_f"] / math.pi for r in truth_rows]
    axes[0].plot(theta, [r["re_wv_true"] for r in truth_rows], "k-", lw=1.2, label="true")
    axes[1].plot(theta, [r["im_wv_true"] for r in truth_rows], "k-", lw=1.2, label="true")
    color = 0
    for t_idx, table in enumerate(tables):
        for variant, rows in _point_series(table):
            rows = sorted(rows, key=lambda r: r["theta_f"])
            th = [r["theta_f"] / math.pi for r in rows]
            fallback = variant if len(tables) == 1 else f"{Path(table.path).stem} {variant}"
            label = _label(spec, color, fallback)
            c = _COLORS[color % len(_COLORS)]
            color += 1
            axes[0].errorbar(
                th, [r["re_wv_extracted"] for r in rows],
                yerr=[r["re_stderr"] for r in rows],
                fmt="o", ms=4, capsize=2, color=c, label=label,
            )
            axes[1].errorbar(
                th, [r["im_wv_extracted"] for r in rows],
                yerr=[r["im_stderr"] for r in rows],
                fmt="o", ms=4, capsize=2, color=c, label=label,
            )
    axes[0].set_ylabel(r"Re $\sigma^z_w$")
    axes[1].set_ylabel(r"Im $\sigma^z_w$")
    axes[1].set_xlabel(r"post-selection angle $\theta/\pi$")
    axes[0].legend(fontsize=8)
    if spec.title:
        axes[0].set_title(spec.title)
    fig.tight_layout()
    return _save(fig, spec.output)


def render_fidelity_sweep(spec: FigureSpec, tables: list) -> list:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for idx, table in enumerate(tables):
        rows = sorted(table.good_rows(), key=lambda r: r["theta_f"])
        ax.plot(
            [r["theta_f"] / math.pi for r in rows],
            [r["fidelity"] for r in rows],
            marker="o", ms=4, color=_COLORS[idx % len(_COLORS)],
            label=_label(spec, idx, Path(table.path).stem),
        )
    ax.set_ylim(0.9, 1.001)
    ax.set_xlabel(r"post-selection angle $\theta/\pi$")
    ax.set_ylabel("fidelity")
    ax.legend(fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _save(fig, spec.output)


def render_tomogram(spec: FigureSpec, tables: list) -> list:
    """Grouped true-vs-estimated bars for the density-matrix entries."""
    rows = [r for t in tables for r in t.good_rows()]
    if not rows:
        raise ValueError("no usable rows for tomogram")
    entries = (r"$\rho_{11}$", r"$\rho_{12}$", r"$\rho_{21}$", r"$\rho_{22}$")

    def bars(r, part):
        r12 = complex(r["re_rho12_est"], r["im_rho12_est"])
        t12 = complex(r["re_rho12_true"], r["im_rho12_true"])
        if part == "re":
            true = [r["rho11_true"], t12.real, t12.real, 1.0 - r["rho11_true"]]
            est = [r["rho11_est"], r12.real, r12.real, 1.0 - r["rho11_est"]]
        else:
            true = [0.0, t12.imag, -t12.imag, 0.0]
            est = [0.0, r12.imag, -r12.imag, 0.0]
        return true, est

    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.6))
    width = 0.8 / (len(rows) + 1)
    x = list(range(len(entries)))
    for part, ax in zip(("re", "im"), axes):
        true_vals = bars(rows[0], part)[0]
        ax.bar([i - 0.4 + width / 2 for i in x], true_vals, width,
               color="0.35", label="true")
        for j, r in enumerate(rows):
            est = bars(r, part)[1]
            label = _label(spec, j, f"estimate (eta={r.get('eta', 1.0):g})")
            ax.bar([i - 0.4 + (j + 1.5) * width for i in x], est, width,
                   color=_COLORS[j % len(_COLORS)], label=label)
        ax.set_xticks(x)
        ax.set_xticklabels(entries)
        ax.set_ylabel("Re" if part == "re" else "Im")
        ax.axhline(0.0, color="k", lw=0.6)
    axes[0].legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, spec.output)


def render(spec: FigureSpec) -> list:
    """Render one figure; returns the written image paths (PNG and SVG)."""
    required = TOMOGRAM_COLUMNS if spec.kind == "tomogram" else SWEEP_COLUMNS
    tables = [load_table(p, required=required) for p in spec.input_csv]
    if spec.kind == "wv_sweep":
        return render_wv_sweep(spec, tables)
    if spec.kind == "fidelity_sweep":
        return render_fidelity_sweep(spec, tables)
    return render_tomogram(spec, tables)
