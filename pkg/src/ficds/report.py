"""Report artifacts: JSON documents, CSV tables and SVG figures.

CSV files are comma-separated with a header row and LF line endings;
floats are written with ``repr`` so they parse back to the same value.
SVGs are standalone and byte-reproducible (fixed hash salt, no date).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SVG_META = {"Date": None}
plt.rcParams["svg.hashsalt"] = "ficds"
plt.rcParams["svg.fonttype"] = "path"


def _clean(obj):
    """Make ``obj`` JSON-safe: non-finite floats become null, tuples lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2) + "\n", encoding="utf-8")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def pole_rows(indices: dict):
    """``(index_id, re, im)`` for every pole of every assessed index."""
    for index_id, a in indices.items():
        for z in a.poles.roots:
            yield (index_id, float(z.real), float(z.imag))


def write_poles_csv(path, indices: dict) -> None:
    write_csv(path, ["index_id", "re_rad_s", "im_rad_s"], pole_rows(indices))


def write_sweep_csv(path, result) -> None:
    rows = ((result.param_path, r.value, r.max_real, r.verdict or "", r.error or "") for r in result.rows)
    write_csv(path, ["param", "value", "max_real", "verdict", "error"], rows)


def write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        trace.write_csv(fh)


# ---------------------------------------------------------------- figures


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_pzmap(path, poles, zeros=(), title=None, band=0.0) -> None:
    """Pole-zero map: poles as crosses, zeros as circles, the imaginary axis dashed.

    Poles right of ``-band`` are drawn in red.
    """
    poles = np.asarray(poles, dtype=complex)
    zeros = np.asarray(zeros, dtype=complex)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.axvline(0.0, color="0.3", lw=0.8, ls="--")
    ax.axhline(0.0, color="0.7", lw=0.5)
    if zeros.size:
        ax.plot(zeros.real, zeros.imag, "o", mfc="none", mec="tab:blue", ms=6, label="zeros", gid="zeros")
    if poles.size:
        bad = poles.real > -band
        if np.any(~bad):
            ax.plot(poles.real[~bad], poles.imag[~bad], "x", color="k", ms=7, label="poles", gid="poles-stable")
        if np.any(bad):
            ax.plot(poles.real[bad], poles.imag[bad], "x", color="tab:red", ms=8, mew=2, label="unstable poles", gid="poles-unstable")
    if poles.size or zeros.size:
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("Re(s) [rad/s]")
    ax.set_ylabel("Im(s) [rad/s]")
    if title:
        ax.set_title(title)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(path, result) -> None:
    rows = [r for r in result.rows if r.max_real is not None and math.isfinite(r.max_real)]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.axhline(0.0, color="0.3", lw=0.8, ls="--")
    if rows:
        x = [r.value for r in rows]
        y = [r.max_real for r in rows]
        ax.plot(x, y, "-", color="0.5", lw=0.8)
        colors = ["tab:red" if r.verdict == "unstable" else ("k" if r.verdict == "stable" else "tab:orange") for r in rows]
        ax.scatter(x, y, c=colors, s=18, zorder=3)
    if result.boundary_bracket:
        ax.axvspan(*result.boundary_bracket, color="tab:orange", alpha=0.15, lw=0)
    ax.set_xlabel(result.param_path)
    ax.set_ylabel("max Re(pole) [rad/s]")
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_trace(path, trace, segments=()) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.8))
    ax.plot(trace.t, trace.v_pcc, lw=0.5, color="k")
    for t, _ in trace.markers:
        ax.axvline(t, color="tab:blue", lw=0.8, ls="--")
    for i, s in enumerate(segments):
        mid = 0.5 * (s.start + min(s.end, trace.end_time))
        y = 1.0 + 0.07 * (i % 2)
        ax.annotate(s.verdict, (mid, y), xycoords=("data", "axes fraction"), ha="center", va="bottom", fontsize=7)
    if trace.diverged:
        ax.axvline(trace.diverged_at, color="tab:red", lw=1.0)
    vmax = np.max(np.abs(trace.v_pcc)) if len(trace.v_pcc) else 0.0
    if vmax > 1e4:
        ax.set_yscale("symlog", linthresh=1e3)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("V_pcc [V]")
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    _save(fig, path)
