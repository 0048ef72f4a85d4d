"""Figure rendering to files (Agg backend only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import EnsembleSpectrum
from .core import FiberParams, PulseSpec

_PREDICTION_STYLES = {
    "omega_max_rad_per_s": ("gain peak", "0.35"),
    "omega_phase_matched_rad_per_s": ("phase matched", "tab:purple"),
    "omega_group_rad_per_s": ("group matched", "tab:brown"),
}


def spectrum_figure(
    spectrum: EnsembleSpectrum,
    fiber: FiberParams,
    pulse: PulseSpec,
    path: str | Path,
    predictions: dict | None = None,
) -> Path:
    """Per-axis energy spectral density on a log scale."""
    x = spectrum.omega * 1e-12  # rad/ps
    fig, ax = plt.subplots(figsize=(7.2, 4.6))
    for values, label, color, width in (
        (spectrum.s_e_total, "total", "black", 1.4),
        (spectrum.s_e_x, "x axis", "tab:blue", 0.9),
        (spectrum.s_e_y, "y axis", "tab:red", 0.9),
    ):
        mask = values > 0.0
        if mask.any():
            ax.semilogy(x[mask], values[mask], label=label, color=color, lw=width)
    for key, (label, color) in _PREDICTION_STYLES.items():
        omega = (predictions or {}).get(key)
        if omega:
            for sign, text in ((1.0, label), (-1.0, None)):
                ax.axvline(sign * omega * 1e-12, color=color, ls="--", lw=0.8,
                           label=text)
    ax.set_xlabel("detuning [rad/ps]")
    ax.set_ylabel("energy spectral density [J s]")
    ax.set_title(
        f"{spectrum.model} model, {spectrum.n_ok}/{spectrum.n_realizations} "
        "realizations",
        fontsize=10,
    )
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, which="both", alpha=0.2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def sweep_figure(rows: list[dict], parameter: str, path: str | Path) -> Path:
    """Peak sideband level against the swept value (log-log)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for structure, marker, fill in (("single", "o", "tab:blue"), ("double", "s", "none")):
        xs = [r["value"] for r in rows if r["structure"] == structure]
        ys = [r["peak_s_e"] for r in rows if r["structure"] == structure]
        if xs:
            ax.loglog(xs, ys, marker=marker, ls="none", mfc=fill,
                      mec="tab:blue", label=f"{structure} peak")
    ordered = sorted(rows, key=lambda r: r["value"])
    ax.loglog([r["value"] for r in ordered], [r["peak_s_e"] for r in ordered],
              color="0.7", lw=0.8, zorder=0)
    ax.set_xlabel(parameter)
    ax.set_ylabel("peak energy spectral density [J s]")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
