"""Figure rendering for the CLI report path.

matplotlib loads lazily and with the Agg backend, so the library and
the plain text paths never pay for it.
"""

from __future__ import annotations

import math

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_samples(model, xs, out_path: str) -> str:
    """Histogram of the draws with the normalized target overlaid."""
    plt = _plt()
    xs = np.asarray(xs)
    lo, hi = float(xs.min()), float(xs.max())
    pad = 0.05 * (hi - lo or 1.0)
    grid = np.linspace(max(model.support.lo, lo - pad),
                       min(model.support.hi, hi + pad), 512)
    dens = np.array([model.density_unnorm(float(x)) for x in grid])
    mass = np.trapezoid(dens, grid)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(xs, bins=60, density=True, alpha=0.45, label=f"{len(xs)} draws")
    if mass > 0.0:
        ax.plot(grid, dens / mass, lw=1.8, label="target (normalized on view)")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_curve(curve, out_path: str) -> str:
    """Mean acceptance probability per sample index."""
    plt = _plt()
    curve = np.asarray(curve)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(np.arange(1, len(curve) + 1), curve, lw=1.2)
    ax.set_xlabel("sample index i")
    ax.set_ylabel("mean acceptance probability")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_region(dump: dict, out_path: str) -> str:
    """Triangle cover of the transformed region plus its true boundary."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 5.5))
    for t in dump["triangles"]:
        vv = [t["v1v"], t["v2v"], t["v3v"], t["v1v"]]
        uu = [t["v1u"], t["v2u"], t["v3u"], t["v1u"]]
        ax.plot(vv, uu, lw=0.7, color="tab:blue", alpha=0.8)
    bv = [b["v"] for b in dump["boundary"] if math.isfinite(b["v"])]
    bu = [b["u"] for b in dump["boundary"] if math.isfinite(b["v"])]
    ax.plot(bv, bu, ".", ms=2.0, color="tab:red", label="region boundary")
    ax.set_xlabel("v")
    ax.set_ylabel("u")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def plot_trace(trace, truths, out_path: str) -> str:
    """Filter estimate with a one-std band, truth overlaid when known."""
    plt = _plt()
    k = np.arange(1, len(trace) + 1)
    est = np.asarray(trace.estimates)
    std = np.asarray(trace.stds)
    fig, (ax, ax2) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True, height_ratios=(3, 1)
    )
    ax.fill_between(k, est - std, est + std, alpha=0.25, label="estimate +- std")
    ax.plot(k, est, lw=1.5, label="estimate")
    if truths is not None:
        ax.plot(k, np.asarray(truths), lw=1.0, ls="--", color="k", label="truth")
    ax.set_ylabel("volatility")
    ax.legend(loc="best")
    ax2.plot(k, np.asarray(trace.acceptance_rates), lw=1.2, color="tab:green")
    ax2.set_ylim(0.0, 1.0)
    ax2.set_xlabel("step k")
    ax2.set_ylabel("acceptance")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
