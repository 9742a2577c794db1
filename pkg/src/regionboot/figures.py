"""Report figures rendered to files.

All rendering uses the Agg backend and strips the writer metadata so the
same inputs produce byte-identical image files on every run.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE = {"dpi": 120, "metadata": {"Software": None}}


def curve_figure(curve, fit=None, path: str = "curve.png") -> str:
    """Scaling curve z(sigma^2) with its extrapolation to sigma^2 = -1."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    s2 = np.asarray(curve.scales)
    z = np.asarray(curve.z)
    if curve.meta.get("backend") == "quad":
        err = np.zeros(s2.shape)
    else:
        err = 1.0 / np.sqrt(np.maximum(np.asarray(curve.weights), 1e-300))
    if np.any(err > 1e-12):
        ax.errorbar(s2, z, yerr=err, fmt="o", ms=4, capsize=2, label="measured")
    else:
        ax.plot(s2, z, "o", ms=4, label="measured")
    if fit is not None:
        grid = np.linspace(-1.0, float(s2.max()), 200)
        pred = np.array([fit.at(x)[0] for x in grid])
        ax.plot(grid, pred, "-", lw=1.0, label="fit")
        val, se = fit.at(-1.0)
        ax.plot([-1.0], [val], "s", ms=6, label=f"extrapolated z = {val:.4g}")
        if se > 0.0:
            ax.errorbar([-1.0], [val], yerr=[se], fmt="none", capsize=3)
    ax.axvline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("squared scale")
    ax.set_ylabel("pivot z")
    ax.set_title(f"{curve.kind} scaling curve")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def rejection_figure(rows, alpha: float = 0.05, path: str = "rejection.png") -> str:
    """Rejection probability against boundary offset, one line per method."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    methods = []
    for r in rows:
        if r.method not in methods:
            methods.append(r.method)
    for m in methods:
        pts = sorted((r.u, r.prob) for r in rows if r.method == m)
        xs = [p[0] for p in pts]
        ys = [100.0 * p[1] for p in pts]
        ax.plot(xs, ys, "o-", ms=3, lw=1.0, label=m)
    ax.axhline(100.0 * alpha, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("boundary offset u")
    ax.set_ylabel("rejection probability (%)")
    ax.set_title("level accuracy along the boundary")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def pvalue_figure(reports, path: str = "pvalues.png") -> str:
    """Bar chart of p-values, grouped by method."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = [r.method for r in reports]
    vals = [100.0 * r.pvalue for r in reports]
    pos = np.arange(len(labels))
    ax.bar(pos, vals, width=0.7)
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("p-value (%)")
    ax.set_title("p-values by method")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path
