"""Figure rendering for analysis reports and sweeps (written next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import MeasureDistribution

# percentile half-widths of the 1/2/3 sigma confidence bands
_CI_LEVELS = (34.13, 47.72, 49.87)
_CI_ALPHAS = (0.30, 0.18, 0.08)


def save_measure_figure(
    path: str | Path,
    dist: MeasureDistribution,
    theory: MeasureDistribution | None = None,
    ideal_reference: float = 1.25,
    classical_bound: float = 1.0,
    bins: int | str = "fd",
) -> Path:
    """Histogram of the measure distribution with confidence bands and
    reference lines (classical bound, ideal value, theory band)."""
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    ax.hist(dist.samples, bins=bins, color="0.55", edgecolor="0.35", zorder=2)
    for level, alpha in zip(_CI_LEVELS, _CI_ALPHAS):
        lo = float(np.percentile(dist.samples, 50.0 - level))
        hi = float(np.percentile(dist.samples, 50.0 + level))
        ax.axvspan(lo, hi, color="tab:green", alpha=alpha, zorder=1)
    ax.axvline(dist.median, color="black", lw=1.5, label=f"median = {dist.median:.4f}")
    ax.axvline(classical_bound, color="tab:orange", ls="--", lw=1.2,
               label=f"classical bound = {classical_bound:g}")
    ax.axvline(ideal_reference, color="tab:red", lw=1.2, label=f"ideal = {ideal_reference:g}")
    if theory is not None:
        ax.axvline(theory.median, color="tab:blue", lw=1.2,
                   label=f"theory median = {theory.median:.4f}")
        ax.axvspan(theory.median - theory.sigma_minus, theory.median + theory.sigma_plus,
                   color="tab:blue", alpha=0.2, zorder=1)
    ax.set_xlabel("event measure")
    ax.set_ylabel("resamples per bin")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(
    path: str | Path,
    phi_values: np.ndarray,
    powers_by_port: dict[str, np.ndarray],
) -> Path:
    """Port powers versus the glass-plate phase."""
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    for port, powers in powers_by_port.items():
        ax.plot(phi_values, powers, label=port)
    ax.set_xlabel("glass-plate phase (rad)")
    ax.set_ylabel("power / input power")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
