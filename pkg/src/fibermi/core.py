"""Grids, fiber and pulse parameters, field containers, spectral transforms.

Unit conventions (SI throughout):

    time             s
    distance         m
    angular freq     rad/s
    power            W
    beta2            s^2/m
    delta_beta0      1/m      (phase birefringence, >= 0, x = slow axis)
    delta_beta1      s/m      (group birefringence, >= 0)
    gamma            1/(W m)

Time-domain arrays hold ``n_time`` complex samples on ``t_j = (j - n/2) tau``,
so t = 0 sits at index ``n/2``.  The matching angular-frequency axis is
``2 pi fftfreq(n_time, tau)`` in FFT bin order.  Continuum spectra use the
kernel ``X(W) = int X(t) exp(+i W t) dt`` for plain fields and the adjoint
kernel ``exp(-i W t)`` for daggered fields, so that the energy spectral
density ``<X_dag(W) X(W)>`` is real and positive for classical states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import hbar as HBAR

FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Nyquist headroom required above the scalar-MI band edge.
NYQUIST_MARGIN = 1.25


class PhysicsError(ValueError):
    """A configuration violates a sampling or stability constraint."""


@dataclass(frozen=True)
class Grid:
    """Time/frequency grid and propagation plan."""

    n_time: int
    window: float  # s
    n_steps: int
    length: float  # m
    tau: float  # s, = window / n_time
    dz: float  # m, = length / n_steps

    def time_axis(self) -> np.ndarray:
        """Sample times, t = 0 at index n_time // 2."""
        return (np.arange(self.n_time) - self.n_time // 2) * self.tau

    def omega_axis(self) -> np.ndarray:
        """Angular frequencies in FFT bin order [rad/s]."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_time, self.tau)

    def omega_axis_shifted(self) -> np.ndarray:
        """Angular frequencies in ascending order [rad/s]."""
        return np.fft.fftshift(self.omega_axis())

    def centering_phases(self) -> np.ndarray:
        """(-1)^k factors mapping FFT phases to the t = 0 centered convention."""
        signs = np.ones(self.n_time)
        signs[1::2] = -1.0
        return signs


def build_grid(n_time: int, window: float, n_steps: int, length: float) -> Grid:
    """Validate and assemble a :class:`Grid`.

    Parameters
    ----------
    n_time : int
        Number of time samples; must be a power of two.
    window : float
        Temporal window T_win [s].
    n_steps : int
        Number of z steps over ``length``.
    length : float
        Propagation distance [m].
    """
    if n_time < 2 or (n_time & (n_time - 1)) != 0:
        raise ValueError(f"n_time must be a power of two >= 2, got {n_time}")
    if not (window > 0.0) or not math.isfinite(window):
        raise ValueError(f"window must be positive and finite, got {window}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not (length > 0.0) or not math.isfinite(length):
        raise ValueError(f"length must be positive and finite, got {length}")
    return Grid(
        n_time=n_time,
        window=window,
        n_steps=n_steps,
        length=length,
        tau=window / n_time,
        dz=length / n_steps,
    )


@dataclass(frozen=True)
class FiberParams:
    """Fiber transmission parameters.

    ``delta_beta0``/``delta_beta1`` are the phase and group birefringence of
    the slow (x) axis relative to the fast (y) axis; both zero means an
    isotropic fiber.  ``coupling_b`` is the nonlinear cross-coupling ratio
    (1/3 for silica).
    """

    lambda0: float  # m
    beta2: float  # s^2/m
    gamma: float  # 1/(W m)
    delta_beta0: float = 0.0  # 1/m
    delta_beta1: float = 0.0  # s/m
    coupling_b: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if not (self.lambda0 > 0.0):
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not (self.gamma >= 0.0):
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.delta_beta0 < 0.0 or self.delta_beta1 < 0.0:
            raise ValueError(
                "delta_beta0 and delta_beta1 must be >= 0 (x is the slow axis); "
                f"got {self.delta_beta0}, {self.delta_beta1}"
            )
        if not (0.0 <= self.coupling_b <= 1.0):
            raise ValueError(f"coupling_b must lie in [0, 1], got {self.coupling_b}")

    @property
    def omega0(self) -> float:
        """Carrier angular frequency [rad/s]."""
        return 2.0 * np.pi * C_LIGHT / self.lambda0

    @property
    def photon_energy(self) -> float:
        """hbar * omega0 [J]."""
        return HBAR * self.omega0

    @property
    def is_isotropic(self) -> bool:
        return self.delta_beta0 == 0.0 and self.delta_beta1 == 0.0


@dataclass(frozen=True)
class MaterialParams:
    """Microscopic material description behind the nonlinear coefficient."""

    chi_xxxx: float  # m^2/V^2
    chi_xyyx: float  # m^2/V^2
    n0: float  # linear refractive index
    a_eff: float  # m^2, effective mode area


def gamma_from_material(material: MaterialParams, lambda0: float) -> float:
    """Nonlinear coefficient gamma [1/(W m)] from the material susceptibility.

    gamma = 3 omega0 chi_xxxx / (4 eps0 n0^2 c^2 A_eff).
    """
    omega0 = 2.0 * np.pi * C_LIGHT / lambda0
    return 3.0 * omega0 * material.chi_xxxx / (
        4.0 * EPS0 * material.n0**2 * C_LIGHT**2 * material.a_eff
    )


def coupling_ratio(material: MaterialParams) -> float:
    """Nonlinear cross-coupling ratio B = chi_xyyx / chi_xxxx."""
    return material.chi_xyyx / material.chi_xxxx


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian pump pulse: power envelope P(t) = P0 exp(-t^2 / (2 sigma_t^2)).

    ``t_fwhm`` is the FWHM of the *power* envelope; ``math.inf`` selects a cw
    pump.  ``theta`` is the linear polarization angle from the slow (x) axis,
    in radians.
    """

    peak_power: float  # W
    t_fwhm: float  # s, FWHM of P(t); inf = cw
    theta: float = 0.0  # rad

    def __post_init__(self) -> None:
        if not (self.peak_power > 0.0):
            raise ValueError(f"peak_power must be positive, got {self.peak_power}")
        if not (self.t_fwhm > 0.0):
            raise ValueError(f"t_fwhm must be positive, got {self.t_fwhm}")

    @property
    def is_cw(self) -> bool:
        return math.isinf(self.t_fwhm)

    @property
    def sigma_t(self) -> float:
        """Standard deviation of the power envelope [s]."""
        return self.t_fwhm / FWHM_TO_SIGMA

    @property
    def sigma_omega(self) -> float:
        """Spectral width of the power envelope, 1 / (2 sigma_t) [rad/s]."""
        return 0.0 if self.is_cw else 1.0 / (2.0 * self.sigma_t)

    @property
    def energy(self) -> float:
        """Pulse energy [J]; inf for cw."""
        if self.is_cw:
            return math.inf
        return self.peak_power * self.sigma_t * math.sqrt(2.0 * math.pi)


@dataclass
class FieldState:
    """The four positive-P field arrays at position z.

    For classical/coherent states ``*_dag`` equals ``conj(*)``; once quantum
    noise acts the daggered fields evolve independently.
    """

    ax: np.ndarray
    ax_dag: np.ndarray
    ay: np.ndarray
    ay_dag: np.ndarray
    z: float = 0.0

    @classmethod
    def vacuum(cls, n_time: int) -> "FieldState":
        zeros = np.zeros(n_time, dtype=np.complex128)
        return cls(zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy(), 0.0)

    def copy(self) -> "FieldState":
        return FieldState(
            self.ax.copy(), self.ax_dag.copy(), self.ay.copy(), self.ay_dag.copy(), self.z
        )

    def is_classical(self, rtol: float = 1e-9) -> bool:
        """Daggered fields equal the conjugates to within rtol of the field scale."""
        scale = max(np.abs(self.ax).max(), np.abs(self.ay).max(), 1e-300)
        return bool(
            np.abs(self.ax_dag - np.conj(self.ax)).max() <= rtol * scale
            and np.abs(self.ay_dag - np.conj(self.ay)).max() <= rtol * scale
        )


def make_gaussian_pump(pulse: PulseSpec, grid: Grid) -> FieldState:
    """Coherent pump field at z = 0.

    The field envelope is sqrt(P(t)) split over the polarization axes by
    ``pulse.theta``; daggered fields start as complex conjugates.
    """
    if pulse.is_cw:
        envelope = np.full(grid.n_time, math.sqrt(pulse.peak_power))
    else:
        t = grid.time_axis()
        envelope = math.sqrt(pulse.peak_power) * np.exp(
            -(t**2) / (4.0 * pulse.sigma_t**2)
        )
    ax = (math.cos(pulse.theta) * envelope).astype(np.complex128)
    ay = (math.sin(pulse.theta) * envelope).astype(np.complex128)
    return FieldState(ax=ax, ax_dag=np.conj(ax), ay=ay, ay_dag=np.conj(ay), z=0.0)


# ---------------------------------------------------------------------------
# Spectral transforms.
#
# to_spectrum approximates int A(t) e^{+iWt} dt as  (-1)^k tau n ifft(A);
# the (-1)^k factor accounts for t = 0 sitting mid-array.  Daggered fields
# transform with the adjoint kernel e^{-iWt}, i.e. (-1)^k tau fft(A_dag).


def to_spectrum(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Continuum-normalized spectrum of a plain field, FFT bin order [sqrt(W) s]."""
    return grid.centering_phases() * (grid.tau * grid.n_time) * np.fft.ifft(values)


def to_spectrum_dag(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectrum of a daggered field (adjoint kernel), FFT bin order."""
    return grid.centering_phases() * grid.tau * np.fft.fft(values)


def from_spectrum(spectrum: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of :func:`to_spectrum`."""
    return np.fft.fft(grid.centering_phases() * spectrum) / (grid.tau * grid.n_time)


def check_sampling(
    grid: Grid,
    fiber: FiberParams,
    pulse: PulseSpec,
    lengths: list[float] | None = None,
) -> None:
    """Enforce window and Nyquist constraints; raise :class:`PhysicsError`.

    Window rule: the window must hold the pulse wings (8 sigma_t), the
    group-birefringence walk-off |delta_beta1| L, and, when phase-matched
    orthogonal sidebands exist (beta2 * delta_beta0 > 0), their group
    walk-off sqrt(8 beta2 delta_beta0) L.

    Nyquist rule (anomalous dispersion only): the grid must resolve the
    scalar MI band, pi / tau >= NYQUIST_MARGIN * sqrt(2) * Omega_max.
    """
    l_max = max(lengths) if lengths else grid.length
    required = 0.0 if pulse.is_cw else 8.0 * pulse.sigma_t
    required += abs(fiber.delta_beta1) * l_max
    if fiber.beta2 * fiber.delta_beta0 > 0.0:
        required += math.sqrt(8.0 * fiber.beta2 * fiber.delta_beta0) * l_max
    if grid.window < required:
        raise PhysicsError(
            f"window {grid.window:.3e} s is smaller than the required "
            f"{required:.3e} s (pulse wings + birefringent walk-off over "
            f"{l_max:.3e} m); enlarge the window or shorten the fiber"
        )
    if fiber.beta2 < 0.0:
        p0 = pulse.peak_power
        band_edge = math.sqrt(4.0 * fiber.gamma * p0 / abs(fiber.beta2))
        nyquist = math.pi / grid.tau
        if nyquist < NYQUIST_MARGIN * band_edge:
            raise PhysicsError(
                f"time step {grid.tau:.3e} s cannot resolve the scalar MI band "
                f"(edge {band_edge:.3e} rad/s needs pi/tau >= "
                f"{NYQUIST_MARGIN * band_edge:.3e} rad/s); decrease tau"
            )
