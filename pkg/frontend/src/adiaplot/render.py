"""Render sweep CSVs into log-log error-scaling figures.

Input files follow the sweep CSV contract of the simulation package:
comment lines start with '#', then a header row containing at least
``m, parity, T, amp_abs, bound_eq1``.  One panel is drawn per distinct m;
each panel shows the even-n series, the odd-n series, the 1/T criterion
bound, and cosmetic slope guides.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("m", "parity", "T", "amp_abs", "bound_eq1")

SLOPE_GUIDES = (-1, -2, -3, -4)


class SchemaError(ValueError):
    """The CSV does not match the sweep-output contract."""


@dataclass
class PlotSpec:
    inputs: list
    output: str
    parity: str = "both"           # even | odd | both
    m_filter: list | None = None   # restrict to these m values
    x_range: tuple | None = None
    y_range: tuple | None = None
    title: str | None = None
    show_bound: bool = True
    show_guides: bool = True


@dataclass
class RenderSummary:
    output: str
    panels: int
    series_per_panel: dict = field(default_factory=dict)  # m -> #data series
    bound_lines_per_panel: dict = field(default_factory=dict)
    points: int = 0


def load_rows(path) -> list:
    """Parse one sweep CSV; raises SchemaError naming any missing column."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        data_lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not data_lines:
        raise SchemaError(f"{path}: no header row found")
    reader = csv.DictReader(data_lines)
    missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"{path}: missing required column(s): {missing}")
    for rec in reader:
        rows.append({
            "m": int(rec["m"]),
            "parity": rec["parity"],
            "T": float(rec["T"]),
            "amp_abs": float(rec["amp_abs"]),
            "bound_eq1": float(rec["bound_eq1"]),
        })
    if not rows:
        raise SchemaError(f"{path}: contains a header but no data rows")
    return rows


def _series(rows, parity):
    pts = sorted((r["T"], r["amp_abs"]) for r in rows if r["parity"] == parity)
    if not pts:
        return np.empty(0), np.empty(0)
    t, a = zip(*pts)
    return np.asarray(t), np.asarray(a)


def render(spec: PlotSpec) -> RenderSummary:
    """Draw the figure described by ``spec`` and return structural counts."""
    rows = []
    for path in spec.inputs:
        rows.extend(load_rows(path))
    if spec.m_filter is not None:
        rows = [r for r in rows if r["m"] in spec.m_filter]
    if spec.parity != "both":
        rows = [r for r in rows if r["parity"] == spec.parity]
    if not rows:
        raise SchemaError("no data rows left after filtering")

    m_values = sorted({r["m"] for r in rows})
    fig, axes = plt.subplots(
        1, len(m_values), figsize=(5.0 * len(m_values), 4.0), squeeze=False,
    )
    summary = RenderSummary(output=spec.output, panels=len(m_values))

    for ax, m in zip(axes[0], m_values):
        panel = [r for r in rows if r["m"] == m]
        n_series = 0
        for parity, marker in (("even", "o"), ("odd", "s")):
            t, a = _series(panel, parity)
            keep = a > 0
            if keep.sum():
                ax.loglog(t[keep], a[keep], marker, ms=3.5, ls="-", lw=0.7,
                          label=f"{parity} n")
                n_series += 1
        bound_lines = 0
        if spec.show_bound:
            pts = sorted({(r["T"], r["bound_eq1"]) for r in panel})
            if pts:
                tb, yb = zip(*pts)
                ax.loglog(tb, yb, "k:", lw=1.2, label="1/T criterion")
                bound_lines = 1
        if spec.show_guides:
            t_all = np.array(sorted(r["T"] for r in panel))
            a_all = [r["amp_abs"] for r in panel if r["amp_abs"] > 0]
            if t_all.size >= 2 and a_all:
                t_anchor, a_anchor = t_all[-1], min(a_all)
                t_guide = np.array([t_all[0], t_all[-1]])
                for slope in SLOPE_GUIDES:
                    ax.loglog(t_guide, a_anchor * (t_guide / t_anchor) ** slope,
                              color="0.8", lw=0.6, zorder=0)
        ax.set_xlabel("T")
        ax.set_ylabel("|E|")
        ax.set_title(f"m = {m}")
        if spec.x_range:
            ax.set_xlim(*spec.x_range)
        if spec.y_range:
            ax.set_ylim(*spec.y_range)
        ax.legend(fontsize=8)
        summary.series_per_panel[m] = n_series
        summary.bound_lines_per_panel[m] = bound_lines

    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)
    summary.points = len(rows)
    return summary
