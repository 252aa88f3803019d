"""Figure rendering for validation reports.

Each suite gets one PNG summarising its records, written next to the report
file. Rendering is deterministic: fixed size and dpi, no embedded metadata,
so repeated runs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SAVE_OPTIONS = {"dpi": 150, "metadata": {"Software": None}}


def render_suite_figures(records: list[dict], directory) -> list[Path]:
    """Render one figure per suite present in the records; returns written paths."""
    directory = Path(directory)
    renderers = {
        "frobenius": _figure_frobenius,
        "prop1": _figure_prop1,
        "prop3": _figure_prop3,
        "thm2": _figure_thm2,
        "compare": _figure_compare,
    }
    written = []
    for suite, renderer in renderers.items():
        subset = [r for r in records if r["suite"] == suite]
        if subset:
            path = directory / f"{suite}.png"
            renderer(subset, path)
            written.append(path)
    return written


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def _save(fig, ax, path):
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **SAVE_OPTIONS)
    plt.close(fig)


def _figure_frobenius(records, path):
    identity = np.array([r["statistic"]["identity"] for r in records])
    norm2 = np.array([r["statistic"]["norm2"] for r in records])
    fig, ax = _new_axes("Plan norm vs closed form", r"$\sum_k N_k/(N_k-1)$", r"$\|\pi\|_F^2$")
    lo, hi = identity.min(), identity.max()
    ax.plot([lo, hi], [lo, hi], color="gray", lw=1, label="agreement")
    ax.scatter(identity, norm2, s=14, alpha=0.7)
    ax.legend()
    _save(fig, ax, path)


def _figure_prop1(records, path):
    cells = [r for r in records if r["check"].startswith("centred")]
    dims = sorted({r["inputs"]["d"] for r in cells})
    fig, ax = _new_axes("Scaled error statistic across sample sizes", "n", "median |err| · √(n/d)")
    for d in dims:
        rows = sorted((r for r in cells if r["inputs"]["d"] == d), key=lambda r: r["inputs"]["n"])
        ns = [r["inputs"]["n"] for r in rows]
        med = [r["statistic"]["median_abs_scaled"] for r in rows]
        q90 = [r["statistic"]["q90_abs_scaled"] for r in rows]
        ax.plot(ns, med, marker="o", label=f"median, d={d}")
        ax.plot(ns, q90, marker=".", ls="--", alpha=0.6, label=f"q90, d={d}")
    ax.set_xscale("log")
    ax.legend()
    _save(fig, ax, path)


def _figure_prop3(records, path):
    rows = [r for r in records if r["check"].startswith("residual-scale")]
    dims = np.array([r["inputs"]["d"] for r in rows], dtype=float)
    ratio = np.array([r["statistic"]["stdev_over_sqrt_d"] for r in rows])
    fig, ax = _new_axes("Residual size against dimension", "d", "stdev(E) / √d")
    order = np.argsort(dims)
    ax.plot(dims[order], ratio[order], marker="o")
    ax.axhspan(0.2, 5.0, color="green", alpha=0.1, label="expected window")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()
    _save(fig, ax, path)


def _figure_thm2(records, path):
    rows = [r for r in records if r["verdict"] == "info"]
    lhs = np.array([r["statistic"]["lhs"] for r in rows])
    rhs = np.array([r["statistic"]["rhs"] for r in rows])
    fig, ax = _new_axes("Plan stability bound", r"$\|E\|_F/\varepsilon$", r"$\|\pi(C)-\pi(\tilde C)\|_F$")
    hi = max(rhs.max(), lhs.max())
    ax.plot([0, hi], [0, hi], color="gray", lw=1, label="bound boundary")
    ax.scatter(rhs, lhs, s=14, alpha=0.7)
    ax.legend()
    _save(fig, ax, path)


def _figure_compare(records, path):
    rows = [r for r in records if r["check"].startswith("positivity")]
    quad = np.array([r["statistic"]["dist_quad"] for r in rows])
    ent = np.array([r["statistic"]["dist_entropic"] for r in rows])
    fig, ax = _new_axes(
        "Distance to the membership plan", "quadratic plan", "entropic plan"
    )
    hi = max(quad.max(), ent.max())
    ax.plot([0, hi], [0, hi], color="gray", lw=1, label="equal distance")
    ax.scatter(quad, ent, s=14, alpha=0.7)
    ax.legend()
    _save(fig, ax, path)
