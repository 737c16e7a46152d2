"""Figures written next to the CSV/JSON reports.

Only the non-interactive Agg backend is used; every function takes an output
path and returns it.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .brownian import excursion_marginal

RC = {
    "axes.spines.right": False,
    "axes.spines.top": False,
    "figure.figsize": (6, 3.6),
    "figure.dpi": 100,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    # no embedded dates, so the same data give the same bytes
    "svg.hashsalt": "posbridge",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
    return path


def ratio_plot(report, path, checks=None):
    """Observed ratio against ``n`` for each check of an LLT report."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for c in checks or report.checks():
            n, obs = report.series(c)
            ax.plot(n, obs, marker="o", ms=3, label=c)
        ax.axhline(1.0, color="k", lw=0.6, ls=":")
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("ratio")
        ax.legend()
        return _save(fig, path)


def sandwich_plot(trace, path, mc=None):
    """Lower and upper bounds against ``delta``; ``mc`` is ``(est, se)``."""
    d = np.asarray(trace.deltas)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.fill_between(d, trace.s, trace.S, alpha=0.25, step=None, label="[s, S]")
        ax.plot(d, trace.s, marker="v", ms=3, lw=0.8)
        ax.plot(d, trace.S, marker="^", ms=3, lw=0.8)
        if mc is not None:
            est, se = mc
            ax.axhline(est, color="C3", lw=0.8, label="Monte Carlo")
            ax.axhspan(est - 3 * se, est + 3 * se, color="C3", alpha=0.1)
        ax.set_xscale("log", base=2)
        ax.invert_xaxis()
        ax.set_xlabel("delta")
        ax.set_ylabel("density bound")
        ax.set_title(f"n={trace.n}, kbar={trace.kbar}, x={trace.x:g}, y={trace.y:g}")
        ax.legend()
        return _save(fig, path)


def _lattice_edges(lo, hi, a_N, bins):
    # whole lattice cells per bin, so no bin gets an extra atom
    stride = max(1, int(np.ceil((hi - lo) * a_N / bins)))
    k0 = np.floor(lo * a_N) - 0.5
    return np.arange(k0, hi * a_N + stride, stride) / a_N


def marginal_plot(samples, eps, path, control=None, bins=60, a_N=None):
    """Histogram of rescaled bridge values against the excursion marginal.

    ``a_N`` aligns the bins with the rescaled lattice ``Z / a_N``.
    """
    samples = np.asarray(samples, dtype=float)
    top = max(float(samples.max()), 3 * np.sqrt(eps * (1 - eps)))
    u = np.linspace(0, top, 400)
    edges = _lattice_edges(0.0, top, a_N, bins) if a_N else bins
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.hist(samples, bins=edges, density=True, alpha=0.5, label="positive bridge")
        if control is not None:
            control = np.asarray(control, dtype=float)
            cedges = _lattice_edges(control.min(), control.max(), a_N, 2 * bins) if a_N else 2 * bins
            ax.hist(control, bins=cedges, density=True, histtype="step", color="0.4", label="free bridge")
        ax.plot(u, excursion_marginal(u, eps), color="k", lw=1.2, label="excursion")
        ax.set_xlabel("S / a_N")
        ax.set_ylabel("density")
        ax.set_title(f"time {1 - eps:g}")
        ax.legend()
        return _save(fig, path)


def gap_plot(gaps, path, label="sup |f_N - f|"):
    """Sup-gaps ``[(N, gap), ...]`` on log-log axes."""
    N = [g[0] for g in gaps]
    v = [g[1] for g in gaps]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.loglog(N, v, marker="o", ms=4)
        ax.set_xlabel("N")
        ax.set_ylabel(label)
        return _save(fig, path)
