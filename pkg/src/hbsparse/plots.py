"""Figure rendering for diagnostics reports.

Each figure is drawn from the same arrays that land in the report CSVs
and saved as PNG next to them.  The Agg backend keeps rendering
deterministic and headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import DiagnosticsReport
from .sampler import SampleSet

__all__ = ["render_report_figures"]

_DPI = 130


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_report_figures(
    out_dir: Path,
    report: DiagnosticsReport,
    samples: SampleSet,
    z_true: np.ndarray | None = None,
) -> list[Path]:
    """Render envelope, scatter-pair, autocorrelation and compressibility
    figures into `out_dir`; returns the written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    # posterior mean with credible envelopes for z, x, theta
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    grid = np.arange(1, report.mean["z"].size + 1)
    for ax, name in zip(axes, ("z", "x", "theta")):
        ax.fill_between(
            grid,
            report.envelope_lo[name],
            report.envelope_hi[name],
            color="#9ecae1",
            alpha=0.8,
            label=f"{report.level:.0%} envelope",
        )
        ax.plot(grid, report.mean[name], "r-", lw=1.2, label="posterior mean")
        if name == "z" and z_true is not None:
            ax.plot(grid, z_true, "k--", lw=1.0, label="generative signal")
        ax.set_title(name)
        ax.set_xlabel("component")
    axes[0].legend(fontsize=8, loc="best")
    fig.tight_layout()
    path = out_dir / "fig_envelopes.png"
    _save(fig, path)
    written.append(path)

    # scatter and histograms of the probed (tau_j, v_j) pairs
    probes = report.probe_indices
    fig, axes = plt.subplots(2, len(probes), figsize=(4.2 * len(probes), 7),
                             squeeze=False)
    for col, j in enumerate(probes):
        tau = samples.tau_draws()[:, j - 1]
        v = samples.v_draws()[:, j - 1]
        ax = axes[0][col]
        ax.plot(tau, v, ".", ms=1.5, alpha=0.4, color="#3182bd")
        ax.set_xlabel(f"tau_{j}")
        ax.set_ylabel(f"v_{j}")
        ax.set_title(f"component {j}")
        ax = axes[1][col]
        ax.hist(tau, bins=60, alpha=0.6, label=f"tau_{j}", color="#3182bd")
        ax.hist(v, bins=60, alpha=0.6, label=f"v_{j}", color="#e6550d")
        ax.legend(fontsize=8)
        ax.set_ylabel("draws")
    fig.tight_layout()
    path = out_dir / "fig_scatter_pairs.png"
    _save(fig, path)
    written.append(path)

    # autocorrelation of the probed physical components
    fig, axes = plt.subplots(2, len(probes), figsize=(4.2 * len(probes), 6),
                             squeeze=False)
    lags = np.arange(report.lags + 1)
    for col, j in enumerate(probes):
        axes[0][col].plot(lags, report.autocorr_x[j], "-", color="#3182bd")
        axes[0][col].set_title(f"x_{j}")
        axes[1][col].plot(lags, report.autocorr_theta[j], "-", color="#e6550d")
        axes[1][col].set_title(f"theta_{j}")
        for row in (0, 1):
            axes[row][col].axhline(0.0, color="k", lw=0.6)
            axes[row][col].set_xlabel("lag")
    fig.tight_layout()
    path = out_dir / "fig_autocorr.png"
    _save(fig, path)
    written.append(path)

    # histogram of per-draw counts above the compressibility threshold
    counts = report.compress_counts
    values = np.arange(counts.min(), counts.max() + 1)
    freq = [np.count_nonzero(counts == v) for v in values]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.bar(values, freq, width=0.9, color="#756bb1")
    ax.axvline(report.compress_mode, color="k", ls="--", lw=0.8,
               label=f"mode = {report.compress_mode}")
    ax.set_xlabel(f"components above delta = {report.delta:.4g}")
    ax.set_ylabel("draws")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "fig_compressibility.png"
    _save(fig, path)
    written.append(path)
    return written
