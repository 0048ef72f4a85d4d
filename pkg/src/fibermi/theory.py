"""Closed-form modulation-instability predictions used to validate simulations.

All gains here are amplitude gains [1/m]; a sideband photon number grows as
sinh^2(g L) from vacuum.  ``G`` denotes the dimensionless peak gain-length
product gamma P0 L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HBAR, C_LIGHT, FiberParams, Grid, PhysicsError, PulseSpec


@dataclass(frozen=True)
class ScalarMIPrediction:
    """Scalar (single-polarization, anomalous-dispersion) MI figures of merit."""

    omega_max: float  # rad/s, gain peak
    band_edge: float  # rad/s, upper edge of the gain band
    peak_gain: float | None  # dimensionless, 2 gamma P0 L (None without length)
    n_vacuum: float | None  # photons/mode at the peak from vacuum, sinh^2(G)


def scalar_mi_gain(
    gamma: float, p0: float, beta2: float, length: float | None = None
) -> ScalarMIPrediction:
    """Peak position and gain of scalar MI for beta2 < 0.

    Omega_max = sqrt(2 gamma P0 / |beta2|); the gain band is
    (0, sqrt(2) Omega_max); the peak power gain over ``length`` is
    exp(2 gamma P0 L).
    """
    if beta2 >= 0.0:
        raise PhysicsError("scalar MI requires anomalous dispersion (beta2 < 0)")
    omega_max = math.sqrt(2.0 * gamma * p0 / abs(beta2))
    peak_gain = None
    n_vacuum = None
    if length is not None:
        g_total = gamma * p0 * length
        peak_gain = 2.0 * g_total
        n_vacuum = math.sinh(g_total) ** 2
    return ScalarMIPrediction(
        omega_max=omega_max,
        band_edge=math.sqrt(2.0) * omega_max,
        peak_gain=peak_gain,
        n_vacuum=n_vacuum,
    )


def mi_gain_profile(
    gamma: float, p0: float, beta2: float, omega: np.ndarray
) -> np.ndarray:
    """Amplitude gain g(Omega) [1/m]; zero outside the gain band.

    g^2 = x (2 gamma P0 - x) with x = |beta2| Omega^2 / 2.
    """
    x = 0.5 * abs(beta2) * np.asarray(omega) ** 2
    g2 = x * (2.0 * gamma * p0 - x)
    return np.sqrt(np.maximum(g2, 0.0))


def monochromatic_sideband_photons(
    gamma: float, p0: float, beta2: float, omega: np.ndarray, length: float
) -> np.ndarray:
    """Vacuum-seeded sideband photons per mode after ``length`` for a cw pump.

    n(Omega) = (gamma P0)^2 Re[(sinh(g L) / g)^2], continued analytically as
    sin^2 outside the gain band (g^2 < 0) and as (gamma P0 L)^2 at band edges.
    """
    x = 0.5 * abs(beta2) * np.asarray(omega, dtype=float) ** 2
    g = np.sqrt((x * (2.0 * gamma * p0 - x)).astype(np.complex128))
    gl = g * length
    # sinh(z)/z -> length as z -> 0; mask tiny |z| to avoid 0/0.
    small = np.abs(gl) < 1e-12
    ratio = np.empty_like(g)
    ratio[~small] = np.sinh(gl[~small]) / g[~small]
    ratio[small] = length
    return (gamma * p0) ** 2 * np.real(ratio**2)


def mi_growth_classical(n_s0: float, n_a0: float, g_total: float) -> tuple[float, float]:
    """Classically seeded sideband growth at peak gain.

    Signal/idler photons per mode after total amplitude gain ``g_total``:
    n_s = n_s0 cosh^2 + n_a0 sinh^2 and symmetrically for the idler.
    """
    ch2 = math.cosh(g_total) ** 2
    sh2 = math.sinh(g_total) ** 2
    return n_s0 * ch2 + n_a0 * sh2, n_a0 * ch2 + n_s0 * sh2


def mi_growth_quantum(n_s0: float, n_a0: float, g_total: float) -> tuple[float, float]:
    """Quantum sideband growth at peak gain; vacuum adds the +1 idler term."""
    ch2 = math.cosh(g_total) ** 2
    sh2 = math.sinh(g_total) ** 2
    return n_s0 * ch2 + (n_a0 + 1.0) * sh2, n_a0 * ch2 + (n_s0 + 1.0) * sh2


def half_photon_rescale(n_classical, n_seed: float):
    """Map a classically seeded spectrum onto the vacuum-growth scale.

    n_classical / (2 n_seed) - 1/2; for quasi-static growth this equals the
    window-averaged sinh^2 gain independent of the seed level.
    """
    return np.asarray(n_classical) / (2.0 * n_seed) - 0.5


def eta_ratio(n_quantum, n_rescaled):
    """Quantum / rescaled-classical sideband ratio in dB."""
    return 10.0 * np.log10(np.asarray(n_quantum) / np.asarray(n_rescaled))


@dataclass(frozen=True)
class BirefringencePrediction:
    """Phase-matched orthogonal-polarization sideband figures for beta2 > 0."""

    omega_phase_matched: float | None  # rad/s, sqrt(2 delta_beta0 / beta2)
    omega_group: float | None  # rad/s, delta_beta1 / beta2 branch
    walkoff_rate: float | None  # s/m, sqrt(8 beta2 delta_beta0)
    walkoff_total: float | None  # s over the given length


def biref_from_beat_length(beat_length: float, lambda0: float) -> tuple[float, float]:
    """(delta_beta0, delta_beta1) for a given polarization beat length.

    delta_beta0 = 2 pi / L_B and delta_beta1 = lambda0 / (c L_B).
    """
    if not (beat_length > 0.0):
        raise ValueError(f"beat_length must be positive, got {beat_length}")
    return 2.0 * math.pi / beat_length, lambda0 / (C_LIGHT * beat_length)


def walkoff(beta2: float, delta_beta0: float, length: float) -> tuple[float, float]:
    """Group walk-off of phase-matched orthogonal sidebands.

    Returns (rate [s/m], total [s]); defined for beta2 * delta_beta0 > 0.
    """
    product = 8.0 * beta2 * delta_beta0
    if product <= 0.0:
        raise PhysicsError(
            "phase-matched orthogonal sidebands need beta2 * delta_beta0 > 0"
        )
    rate = math.sqrt(product)
    return rate, rate * length


def biref_prediction(fiber: FiberParams, length: float) -> BirefringencePrediction:
    """Assemble the birefringent sideband landmarks for one fiber."""
    omega_pm = None
    omega_group = None
    rate = None
    total = None
    if fiber.beta2 > 0.0 and fiber.delta_beta0 > 0.0:
        omega_pm = math.sqrt(2.0 * fiber.delta_beta0 / fiber.beta2)
        rate, total = walkoff(fiber.beta2, fiber.delta_beta0, length)
    if fiber.beta2 != 0.0 and fiber.delta_beta1 > 0.0:
        omega_group = fiber.delta_beta1 / abs(fiber.beta2)
    return BirefringencePrediction(
        omega_phase_matched=omega_pm,
        omega_group=omega_group,
        walkoff_rate=rate,
        walkoff_total=total,
    )


def convolved_sideband_prediction(
    fiber: FiberParams,
    pulse: PulseSpec,
    grid: Grid,
    length: float,
    n_time_samples: int = 81,
) -> np.ndarray:
    """Quasi-static prediction of the quantum-seeded energy spectral density.

    For each instant of the pump envelope the cw vacuum growth
    hbar omega0 n(Omega; P(t)) applies; integrating over the window and
    convolving with the pump's spectral envelope (Gaussian, width
    sigma_omega) yields the expected S_E(Omega) [J s] on the ascending
    frequency axis of ``grid``.  A cw pump reduces to
    hbar omega0 T_win n(Omega; P0).
    """
    omega = grid.omega_axis_shifted()
    hw0 = HBAR * fiber.omega0

    if pulse.is_cw:
        return hw0 * grid.window * monochromatic_sideband_photons(
            fiber.gamma, pulse.peak_power, fiber.beta2, omega, length
        )

    # Time quadrature over the power envelope (trapezoid on +-6 sigma_t).
    t = np.linspace(-6.0 * pulse.sigma_t, 6.0 * pulse.sigma_t, n_time_samples)
    powers = pulse.peak_power * np.exp(-(t**2) / (2.0 * pulse.sigma_t**2))
    weights = np.full(n_time_samples, t[1] - t[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5

    integrated = np.zeros_like(omega)
    for p_t, w_t in zip(powers, weights):
        integrated += w_t * monochromatic_sideband_photons(
            fiber.gamma, p_t, fiber.beta2, omega, length
        )

    # Smear by the pump spectral envelope; unit-normalized discrete kernel.
    d_omega = 2.0 * np.pi / grid.window
    half_width = max(1, int(np.ceil(6.0 * pulse.sigma_omega / d_omega)))
    k = np.arange(-half_width, half_width + 1) * d_omega
    kernel = np.exp(-(k**2) / (2.0 * pulse.sigma_omega**2))
    kernel /= kernel.sum()
    return hw0 * np.convolve(integrated, kernel, mode="same")
