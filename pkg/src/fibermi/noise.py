"""Quantum and classical noise sources.

Quantum noise enters the stochastic propagation step as real white-noise
grids zeta_k(t) with variance 1 / (dz tau) per sample, the discrete form of
delta-correlated continuum noise.  Classical input noise seeds the z = 0
spectrum with a per-Fourier-bin amplitude whose square is an energy spectral
density [J s]; the two seed parameterizations are

    photons per mode:  amplitude^2 = n0 * 2 pi hbar omega0 / sigma_omega
    photons per GHz:   amplitude^2 = n_ghz * hbar omega0 / 1e9

(the per-mode bandwidth is the pump spectral width sigma_omega; by Parseval
S_E is energy per ordinary-frequency Hz, which makes the per-GHz form
2-pi-free).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FiberParams, FieldState, Grid, PulseSpec, from_spectrum

CLASSICAL_MODELS = ("none", "phase", "gaussian")


@dataclass(frozen=True)
class NoiseSpec:
    """What noise acts on a run.

    Exactly one of ``photons_per_mode`` / ``photons_per_ghz`` /
    ``amplitude`` may be set when ``classical_model`` is not ``"none"``.
    """

    quantum: bool = True
    classical_model: str = "none"
    photons_per_mode: float | None = None
    photons_per_ghz: float | None = None
    amplitude: float | None = None  # sqrt(J s), per Fourier bin
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.classical_model not in CLASSICAL_MODELS:
            raise ValueError(
                f"classical_model must be one of {CLASSICAL_MODELS}, "
                f"got {self.classical_model!r}"
            )
        levels = [
            v
            for v in (self.photons_per_mode, self.photons_per_ghz, self.amplitude)
            if v is not None
        ]
        if self.classical_model == "none":
            if levels:
                raise ValueError("classical noise level set but classical_model is 'none'")
        elif len(levels) != 1:
            raise ValueError(
                "exactly one of photons_per_mode / photons_per_ghz / amplitude "
                "must be set for classical noise"
            )
        elif levels[0] < 0.0:
            raise ValueError(f"classical noise level must be >= 0, got {levels[0]}")


@dataclass(frozen=True)
class NoiseDraw:
    """One step's worth of white-noise grids, shape (channels, n_time)."""

    zeta: np.ndarray
    std: float  # per-sample standard deviation, 1 / sqrt(dz tau)

    @property
    def channels(self) -> int:
        return self.zeta.shape[0]


def derive_realization_rng(master_seed: int, realization_index: int) -> np.random.Generator:
    """Counter-based generator for one realization.

    Philox keyed by (master_seed, realization_index): realizations are
    statistically independent and reproducible regardless of execution
    order or thread count.
    """
    bits = np.random.Philox(key=np.array([master_seed, realization_index], dtype=np.uint64))
    return np.random.Generator(bits)


def quantum_noise_draw(
    grid: Grid, rng: np.random.Generator, channels: int = 4
) -> NoiseDraw:
    """Draw the zeta_1..zeta_channels grids for one z step."""
    std = 1.0 / math.sqrt(grid.dz * grid.tau)
    zeta = rng.standard_normal((channels, grid.n_time)) * std
    return NoiseDraw(zeta=zeta, std=std)


def classical_phase_noise(
    amplitude: float, grid: Grid, rng: np.random.Generator
) -> np.ndarray:
    """Spectral seed with fixed modulus and Gaussian-random phase.

    N(W) = amplitude * exp(i pi zeta(W)), zeta ~ N(0, 1) per bin.
    """
    zeta = rng.standard_normal(grid.n_time)
    return amplitude * np.exp(1j * np.pi * zeta)


def classical_gaussian_noise(
    amplitude: float, grid: Grid, rng: np.random.Generator
) -> np.ndarray:
    """Circular complex Gaussian spectral seed with <|N|^2> = amplitude^2."""
    zeta = rng.standard_normal((2, grid.n_time))
    return amplitude / math.sqrt(2.0) * (zeta[0] + 1j * zeta[1])


def resolve_classical_amplitude(
    noise: NoiseSpec, fiber: FiberParams, pulse: PulseSpec
) -> float:
    """Per-bin spectral seed amplitude [sqrt(J s)] from a :class:`NoiseSpec`."""
    if noise.amplitude is not None:
        return noise.amplitude
    if noise.photons_per_ghz is not None:
        return math.sqrt(noise.photons_per_ghz * fiber.photon_energy / 1.0e9)
    if noise.photons_per_mode is not None:
        if pulse.sigma_omega <= 0.0:
            raise ValueError(
                "photons_per_mode needs a pulsed pump (the mode bandwidth is "
                "the pump spectral width); use photons_per_ghz for cw"
            )
        return math.sqrt(
            noise.photons_per_mode * 2.0 * math.pi * fiber.photon_energy / pulse.sigma_omega
        )
    raise ValueError("no classical noise level set")


def apply_classical_noise(
    state: FieldState,
    noise: NoiseSpec,
    fiber: FiberParams,
    pulse: PulseSpec,
    grid: Grid,
    rng: np.random.Generator,
) -> None:
    """Seed the z = 0 spectrum of each pump-bearing axis in place.

    Draw order is fixed (x axis first, then y) so that realizations are
    reproducible; daggered fields are re-conjugated afterwards, the state
    staying classical.
    """
    if noise.classical_model == "none":
        return
    amplitude = resolve_classical_amplitude(noise, fiber, pulse)
    model = classical_phase_noise if noise.classical_model == "phase" else classical_gaussian_noise
    if abs(math.cos(pulse.theta)) > 1e-12:
        state.ax += from_spectrum(model(amplitude, grid, rng), grid)
        state.ax_dag[:] = np.conj(state.ax)
    if abs(math.sin(pulse.theta)) > 1e-12:
        state.ay += from_spectrum(model(amplitude, grid, rng), grid)
        state.ay_dag[:] = np.conj(state.ay)
