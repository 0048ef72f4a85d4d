"""Ensemble spectra, photon-number conversions and sideband reports.

The energy spectral density S_E(W) [J s] is the ensemble mean of
X_dag(W) X(W); by Parseval it is the pulse energy per ordinary-frequency Hz.
Photons per mode use the pump spectral width as the mode bandwidth:
n(W) = S_E(W) sigma_omega / (2 pi hbar omega0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FiberParams, FieldState, Grid, PulseSpec, to_spectrum, to_spectrum_dag


@dataclass(frozen=True)
class EnsembleSpectrum:
    """Ensemble-averaged spectra on the ascending frequency axis."""

    omega: np.ndarray  # rad/s, ascending
    s_e_x: np.ndarray  # J s
    s_e_y: np.ndarray
    s_e_total: np.ndarray
    n_realizations: int
    n_ok: int
    discarded: list[tuple[int, int]] = field(default_factory=list)
    im_residual: float = 0.0
    s_e_even: np.ndarray | None = None  # mean over even-index realizations
    s_e_odd: np.ndarray | None = None
    master_seed: int = 0
    model: str = "scalar"
    window: float = 0.0  # s


@dataclass(frozen=True)
class SidebandReport:
    """Peak structure of a spectrum within a detuning band."""

    omega_peak: float  # rad/s
    value_peak: float
    structure: str  # "single" or "double"
    omega_secondary: float | None
    value_secondary: float | None
    band: tuple[float, float]
    smooth_bins: int


def energy_spectral_density(state: FieldState, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Single-realization spectral products (x, y), FFT bin order, complex."""
    sx = to_spectrum_dag(state.ax_dag, grid) * to_spectrum(state.ax, grid)
    sy = to_spectrum_dag(state.ay_dag, grid) * to_spectrum(state.ay, grid)
    return sx, sy


def photons_per_mode(
    s_e: np.ndarray, fiber: FiberParams, pulse: PulseSpec
) -> np.ndarray:
    """Convert an energy spectral density [J s] to photons per mode."""
    if pulse.sigma_omega <= 0.0:
        raise ValueError("photons per mode are defined for pulsed pumps only")
    return np.asarray(s_e) * pulse.sigma_omega / (2.0 * np.pi * fiber.photon_energy)


def photon_number(state: FieldState, grid: Grid, omega0_energy: float) -> float:
    """Total photon number of a state (both axes), Re(A_dag A) integrated."""
    density = (state.ax_dag * state.ax + state.ay_dag * state.ay).real
    return float(grid.tau * density.sum() / omega0_energy)


def boxcar_smooth(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Moving average over ``n_bins`` (clipped at the edges)."""
    if n_bins <= 1:
        return np.asarray(values, dtype=float)
    kernel = np.ones(int(n_bins)) / int(n_bins)
    padded = np.pad(np.asarray(values, dtype=float), (n_bins, n_bins), mode="edge")
    return np.convolve(padded, kernel, mode="same")[n_bins:-n_bins]


def split_half_scatter_db(
    spectrum: EnsembleSpectrum,
    band: tuple[float, float] | None = None,
    smooth_bins: int = 1,
) -> float | None:
    """Ensemble sampling scatter estimated from the two half-ensemble means.

    Median of |10 log10(even/odd)| / 2 over the usable bins.  ``band`` is a
    positive-detuning interval applied to |omega| (both sidebands); without
    it all bins are used.  Bins where either half is non-positive are
    skipped; returns None when no bin survives or the halves are missing.
    """
    if spectrum.s_e_even is None or spectrum.s_e_odd is None:
        return None
    even = boxcar_smooth(spectrum.s_e_even, smooth_bins)
    odd = boxcar_smooth(spectrum.s_e_odd, smooth_bins)
    mask = (even > 0.0) & (odd > 0.0)
    if band is not None:
        lo, hi = band
        mask &= (np.abs(spectrum.omega) >= lo) & (np.abs(spectrum.omega) <= hi)
    if not mask.any():
        return None
    diffs = np.abs(10.0 * np.log10(even[mask] / odd[mask]))
    return float(np.median(diffs)) / 2.0


def _band_slice(omega: np.ndarray, band: tuple[float, float]) -> slice:
    lo, hi = band
    if not (hi > lo):
        raise ValueError(f"band must satisfy hi > lo, got {band}")
    idx = np.nonzero((omega >= lo) & (omega <= hi))[0]
    if idx.size < 3:
        raise ValueError(
            f"band ({lo:.3e}, {hi:.3e}) rad/s covers fewer than 3 grid bins"
        )
    return slice(int(idx[0]), int(idx[-1]) + 1)


def sideband_peak(
    spectrum: EnsembleSpectrum,
    band: tuple[float, float],
    *,
    axis: str = "total",
    smooth_bins: int = 1,
    secondary_fraction: float = 0.5,
    dip_fraction: float = 0.8,
) -> SidebandReport:
    """Locate the sideband peak inside ``band`` and classify its structure.

    The spectrum (optionally boxcar smoothed) is scanned for local maxima;
    the structure is "double" when a second local maximum exceeds
    ``secondary_fraction`` of the primary and the valley between them drops
    below ``dip_fraction`` of the smaller peak.
    """
    values = {"total": spectrum.s_e_total, "x": spectrum.s_e_x, "y": spectrum.s_e_y}[axis]
    sl = _band_slice(spectrum.omega, band)
    w = spectrum.omega[sl]
    v = boxcar_smooth(values[sl], smooth_bins)

    peaks = [i for i in range(1, len(v) - 1) if v[i] >= v[i - 1] and v[i] > v[i + 1]]
    if not peaks:
        peaks = [int(np.argmax(v))]
    peaks.sort(key=lambda i: v[i], reverse=True)
    primary = peaks[0]

    structure = "single"
    secondary = None
    for candidate in peaks[1:]:
        if v[candidate] < secondary_fraction * v[primary]:
            break
        lo, hi = sorted((primary, candidate))
        valley = v[lo : hi + 1].min()
        if valley < dip_fraction * v[candidate]:
            structure = "double"
            secondary = candidate
            break

    return SidebandReport(
        omega_peak=float(w[primary]),
        value_peak=float(v[primary]),
        structure=structure,
        omega_secondary=None if secondary is None else float(w[secondary]),
        value_secondary=None if secondary is None else float(v[secondary]),
        band=(float(band[0]), float(band[1])),
        smooth_bins=int(smooth_bins),
    )


def compare_quantum_classical(
    quantum: EnsembleSpectrum,
    classical: EnsembleSpectrum,
    band: tuple[float, float],
    *,
    rescale: float = 1.0,
    smooth_bins: int = 64,
) -> dict:
    """Largest dB gap between two smoothed spectra inside ``band``.

    ``rescale`` multiplies the classical spectrum first (e.g. the
    half-photon mapping); returns the max and mean |ratio| in dB plus the
    per-bin ratio for plotting.
    """
    if quantum.omega.shape != classical.omega.shape or not np.allclose(
        quantum.omega, classical.omega
    ):
        raise ValueError("spectra live on different grids")
    sl = _band_slice(quantum.omega, band)
    sq = boxcar_smooth(quantum.s_e_total[sl], smooth_bins)
    sc = boxcar_smooth(classical.s_e_total[sl], smooth_bins) * rescale
    if (sq <= 0.0).any() or (sc <= 0.0).any():
        raise ValueError("spectra must be positive inside the comparison band")
    ratio_db = 10.0 * np.log10(sq / sc)
    return {
        "max_abs_db": float(np.max(np.abs(ratio_db))),
        "mean_abs_db": float(np.mean(np.abs(ratio_db))),
        "omega": quantum.omega[sl],
        "ratio_db": ratio_db,
    }
