"""PNG figures written next to the CSV outputs (optional, CSV stays canonical)."""

from __future__ import annotations

import os

import numpy as np
from scipy import stats


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_histogram_figures(summary, outdir) -> list[str]:
    """One density-scaled histogram per studentized column, N(0,1) overlaid."""
    plt = _pyplot()
    written = []
    grid = np.linspace(-4.0, 4.0, 401)
    for name in summary.columns:
        edges, counts = summary.histogram(name)
        widths = np.diff(edges)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar(edges[:-1], counts / (counts.sum() * widths), width=widths, align="edge",
               color="0.75", edgecolor="0.3", linewidth=0.5)
        ax.plot(grid, stats.norm.pdf(grid), "k-", lw=1.2)
        D, p = summary.ks(name)
        ax.set_title(f"{name}: mean {summary.mean(name):+.3f}, sd {summary.sd(name):.3f}, KS p {p:.3f}",
                     fontsize=9)
        ax.set_xlabel("studentized value")
        fig.tight_layout()
        path = os.path.join(outdir, f"hist_{name}.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written


def write_density_figure(x, pdf, nu, h, path) -> str:
    """Tabulated density of the rescaled increment against the Cauchy density."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, pdf, "k-", lw=1.2, label=f"nu={nu:g}, h={h:g}")
    ax.plot(x, 1.0 / (np.pi * (1.0 + x * x)), "k--", lw=0.8, label="Cauchy")
    ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
