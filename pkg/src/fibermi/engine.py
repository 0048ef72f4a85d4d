"""Split-step Fourier propagation of the stochastic polarization equations.

One z step of size dz applies, in order:

    linear half step (dz/2)     dispersion + birefringence, exact in Fourier
    nonlinear full step (dz)    exact rotation in the circular basis
    stochastic full step (dz)   Ito Euler-Maruyama multiplicative noise
    linear half step (dz/2)

The engine works in a frame co-rotating with the phase birefringence
(a_x = A_x e^{+i db0 z/2}, a_y = A_y e^{-i db0 z/2}, daggered fields with
opposite phases), which removes every explicit z dependence from the
equations of motion; the constant +-db0/2 rates join the linear step.  Energy
spectra per axis are unchanged by the frame.

The nonlinear step is solved exactly: in the circular basis
u = (a_x + i a_y)/sqrt(2), v = (a_x - i a_y)/sqrt(2) (daggered basis with the
opposite sign of i) the equations reduce to du/dz = i gamma [(1-B) u_dag u +
(1+B) v_dag v] u and cyclic, whose quadratic forms u_dag u, v_dag v are
invariants, so the step is a complex-angle phase rotation.  The scalar model
reduces to A <- A exp(i gamma (A_dag A) dz).

The scalar model (two noise channels) is selected for an isotropic fiber
pumped along x only; everything else runs the four-field model (four
channels), which also seeds orthogonal-polarization MI from vacuum.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import EnsembleSpectrum
from .core import (
    FiberParams,
    FieldState,
    Grid,
    PulseSpec,
    check_sampling,
    make_gaussian_pump,
    to_spectrum,
    to_spectrum_dag,
)
from .noise import (
    NoiseDraw,
    NoiseSpec,
    apply_classical_noise,
    derive_realization_rng,
    quantum_noise_draw,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
ROOT_PLUS_I = cmath.exp(0.25j * math.pi)  # sqrt(+i)
ROOT_MINUS_I = cmath.exp(-0.25j * math.pi)  # sqrt(-i)

# Abort an ensemble when more than this fraction of realizations diverges.
MAX_DIVERGED_FRACTION = 0.1

MODELS = ("auto", "scalar", "vector")


class DivergenceError(RuntimeError):
    """Propagation produced non-finite field values."""

    def __init__(self, message: str, step_index: int | None = None,
                 realization_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index
        self.realization_index = realization_index


@dataclass(frozen=True)
class LinearOperator:
    """Precomputed per-field Fourier multipliers for one linear step of dz."""

    dz: float
    mx: np.ndarray
    mx_dag: np.ndarray
    my: np.ndarray
    my_dag: np.ndarray


@dataclass(frozen=True)
class StepReport:
    """Summary of one completed realization."""

    model: str
    n_steps: int
    dz: float
    quantum: bool


def make_linear_operator(fiber: FiberParams, grid: Grid, dz: float) -> LinearOperator:
    """Fourier multipliers over ``dz`` in the co-rotating frame.

    With the reconstruction kernel e^{+i W t} (d/dt -> +iW), the x (slow)
    field evolves as exp(i dz [b2 W^2 / 2 - db1 W / 2 + db0 / 2]); daggered
    fields flip the sign of the dispersion and db0 terms, the y fields flip
    the birefringence terms.  All four satisfy m_dag(W) = conj(m(-W)), which
    keeps classical states classical.  The advection term is odd in W, so it
    is zeroed on the self-paired Nyquist bin; otherwise that one bin would
    leak conjugacy violations into deterministic runs.
    """
    w = grid.omega_axis()
    disp = 0.5 * fiber.beta2 * w**2
    drift = 0.5 * fiber.delta_beta1 * w
    drift[grid.n_time // 2] = 0.0
    rot = 0.5 * fiber.delta_beta0
    return LinearOperator(
        dz=dz,
        mx=np.exp(1j * dz * (disp - drift + rot)),
        mx_dag=np.exp(1j * dz * (-disp - drift - rot)),
        my=np.exp(1j * dz * (disp + drift - rot)),
        my_dag=np.exp(1j * dz * (-disp + drift + rot)),
    )


def linear_step(state: FieldState, op: LinearOperator, *, skip_y: bool = False) -> None:
    """Apply one linear step in place."""
    state.ax = np.fft.ifft(op.mx * np.fft.fft(state.ax))
    state.ax_dag = np.fft.ifft(op.mx_dag * np.fft.fft(state.ax_dag))
    if not skip_y:
        state.ay = np.fft.ifft(op.my * np.fft.fft(state.ay))
        state.ay_dag = np.fft.ifft(op.my_dag * np.fft.fft(state.ay_dag))


def nonlinear_step_scalar(state: FieldState, gamma: float, dz: float) -> None:
    """Exact single-polarization Kerr rotation over dz."""
    w = np.exp(1j * gamma * dz * (state.ax_dag * state.ax))
    state.ax = state.ax * w
    state.ax_dag = state.ax_dag / w


def nonlinear_step_vector(state: FieldState, gamma: float, b: float, dz: float) -> None:
    """Exact two-polarization Kerr rotation over dz (circular basis)."""
    u = (state.ax + 1j * state.ay) * INV_SQRT2
    v = (state.ax - 1j * state.ay) * INV_SQRT2
    ud = (state.ax_dag - 1j * state.ay_dag) * INV_SQRT2
    vd = (state.ax_dag + 1j * state.ay_dag) * INV_SQRT2
    cu = ud * u
    cv = vd * v
    eu = np.exp(1j * (gamma * dz) * ((1.0 - b) * cu + (1.0 + b) * cv))
    ev = np.exp(1j * (gamma * dz) * ((1.0 - b) * cv + (1.0 + b) * cu))
    u *= eu
    ud /= eu
    v *= ev
    vd /= ev
    state.ax = (u + v) * INV_SQRT2
    state.ay = -1j * (u - v) * INV_SQRT2
    state.ax_dag = (ud + vd) * INV_SQRT2
    state.ay_dag = 1j * (ud - vd) * INV_SQRT2


def stochastic_step(
    state: FieldState, fiber: FiberParams, draw: NoiseDraw, dz: float
) -> None:
    """Ito Euler-Maruyama quantum-noise increment over dz.

    Two channels act on the x pair only (scalar model); four channels add
    the polarization-coupling terms with weight sqrt(B).  Increments are
    evaluated from the pre-step fields.
    """
    s = math.sqrt(fiber.gamma * fiber.photon_energy) * dz
    z = draw.zeta
    if draw.channels == 2:
        state.ax = state.ax * (1.0 + ROOT_PLUS_I * s * z[0])
        state.ax_dag = state.ax_dag * (1.0 + ROOT_MINUS_I * s * z[1])
        return
    if draw.channels != 4:
        raise ValueError(f"noise draw must have 2 or 4 channels, got {draw.channels}")
    rb = math.sqrt(fiber.coupling_b)
    dax = ROOT_PLUS_I * s * (z[0] * state.ax + rb * z[2] * state.ay)
    day = ROOT_PLUS_I * s * (z[0] * state.ay - rb * z[2] * state.ax)
    dax_dag = ROOT_MINUS_I * s * (z[1] * state.ax_dag + rb * z[3] * state.ay_dag)
    day_dag = ROOT_MINUS_I * s * (z[1] * state.ay_dag - rb * z[3] * state.ax_dag)
    state.ax += dax
    state.ay += day
    state.ax_dag += dax_dag
    state.ay_dag += day_dag


def to_corotating_frame(state: FieldState, fiber: FiberParams) -> None:
    """Rotate physical fields into the constant-coefficient frame, in place."""
    ph = cmath.exp(0.5j * fiber.delta_beta0 * state.z)
    if ph == 1.0:
        return
    state.ax *= ph
    state.ax_dag *= ph.conjugate()
    state.ay *= ph.conjugate()
    state.ay_dag *= ph


def from_corotating_frame(state: FieldState, fiber: FiberParams) -> None:
    """Inverse of :func:`to_corotating_frame`."""
    ph = cmath.exp(-0.5j * fiber.delta_beta0 * state.z)
    if ph == 1.0:
        return
    state.ax *= ph
    state.ax_dag *= ph.conjugate()
    state.ay *= ph.conjugate()
    state.ay_dag *= ph


def resolve_model(model: str, fiber: FiberParams, pulse: PulseSpec) -> str:
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if model != "auto":
        return model
    return "scalar" if fiber.is_isotropic and pulse.theta == 0.0 else "vector"


def _all_finite(state: FieldState, skip_y: bool) -> bool:
    if not (np.isfinite(state.ax).all() and np.isfinite(state.ax_dag).all()):
        return False
    if skip_y:
        return True
    return bool(np.isfinite(state.ay).all() and np.isfinite(state.ay_dag).all())


def propagate_realization(
    state: FieldState,
    fiber: FiberParams,
    grid: Grid,
    noise: NoiseSpec,
    rng: np.random.Generator | int,
    model: str = "vector",
) -> StepReport:
    """Propagate one realization from ``state.z`` over ``grid.n_steps`` steps.

    ``state`` is mutated in place and ends in the physical (non-rotating)
    frame.  ``rng`` is either the generator already used for this
    realization's z = 0 classical noise, or a realization index from which
    one is derived.  Raises :class:`DivergenceError` on non-finite fields.
    """
    if model not in ("scalar", "vector"):
        raise ValueError(f"model must be 'scalar' or 'vector', got {model!r}")
    scalar = model == "scalar"
    if scalar and (np.any(state.ay) or np.any(state.ay_dag)):
        raise ValueError("scalar model requires an empty y polarization")
    if isinstance(rng, (int, np.integer)):
        rng = derive_realization_rng(noise.master_seed, int(rng))
    channels = 2 if scalar else 4
    half = make_linear_operator(fiber, grid, 0.5 * grid.dz)
    to_corotating_frame(state, fiber)
    # Blowup shows as overflow/nan one step before the finiteness check
    # catches it; those warnings carry no information the check doesn't.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step in range(grid.n_steps):
            linear_step(state, half, skip_y=scalar)
            if scalar:
                nonlinear_step_scalar(state, fiber.gamma, grid.dz)
            else:
                nonlinear_step_vector(state, fiber.gamma, fiber.coupling_b, grid.dz)
            if noise.quantum:
                stochastic_step(state, fiber, quantum_noise_draw(grid, rng, channels), grid.dz)
            linear_step(state, half, skip_y=scalar)
            state.z += grid.dz
            if not _all_finite(state, scalar):
                raise DivergenceError(
                    f"non-finite field values at step {step} (z = {state.z:.6g} m); "
                    "the stochastic step size is likely too large",
                    step_index=step,
                )
    from_corotating_frame(state, fiber)
    return StepReport(model=model, n_steps=grid.n_steps, dz=grid.dz, quantum=noise.quantum)


def _realization_products(
    index: int,
    fiber: FiberParams,
    pulse: PulseSpec,
    grid: Grid,
    noise: NoiseSpec,
    model: str,
):
    """Spectral products (x, y) for one realization, or the diverged step."""
    rng = derive_realization_rng(noise.master_seed, index)
    state = make_gaussian_pump(pulse, grid)
    apply_classical_noise(state, noise, fiber, pulse, grid, rng)
    try:
        propagate_realization(state, fiber, grid, noise, rng, model)
    except DivergenceError as err:
        return None, None, err.step_index
    sx = to_spectrum_dag(state.ax_dag, grid) * to_spectrum(state.ax, grid)
    sy = to_spectrum_dag(state.ay_dag, grid) * to_spectrum(state.ay, grid)
    return sx, sy, None


def run_ensemble(
    fiber: FiberParams,
    pulse: PulseSpec,
    grid: Grid,
    noise: NoiseSpec,
    n_realizations: int,
    *,
    model: str = "auto",
    threads: int = 1,
    lengths_hint: list[float] | None = None,
) -> EnsembleSpectrum:
    """Ensemble-averaged energy spectral density per polarization axis.

    Realizations are accumulated in index order whatever the thread count,
    so results are bit-reproducible for a given master seed.  Diverged
    realizations are recorded and excluded; more than
    ``MAX_DIVERGED_FRACTION`` of them aborts with :class:`DivergenceError`.
    """
    if n_realizations < 1:
        raise ValueError(f"n_realizations must be >= 1, got {n_realizations}")
    check_sampling(grid, fiber, pulse, lengths_hint)
    mode = resolve_model(model, fiber, pulse)

    def one(index: int):
        return _realization_products(index, fiber, pulse, grid, noise, mode)

    acc_x = np.zeros(grid.n_time, dtype=np.complex128)
    acc_y = np.zeros(grid.n_time, dtype=np.complex128)
    acc_half = [np.zeros(grid.n_time, dtype=np.complex128) for _ in range(2)]
    n_half = [0, 0]
    discarded: list[tuple[int, int]] = []

    if threads <= 1:
        results = map(one, range(n_realizations))
        executor = None
    else:
        executor = ThreadPoolExecutor(max_workers=threads)
        results = executor.map(one, range(n_realizations))
    try:
        n_ok = 0
        for index, (sx, sy, bad_step) in enumerate(results):
            if bad_step is not None:
                discarded.append((index, bad_step))
                continue
            acc_x += sx
            acc_y += sy
            acc_half[n_ok % 2] += sx + sy
            n_half[n_ok % 2] += 1
            n_ok += 1
    finally:
        if executor is not None:
            executor.shutdown()

    if len(discarded) > MAX_DIVERGED_FRACTION * n_realizations or n_ok == 0:
        raise DivergenceError(
            f"{len(discarded)} of {n_realizations} realizations diverged "
            f"(first at realization {discarded[0][0]}, step {discarded[0][1]}); "
            "reduce the step size",
            step_index=discarded[0][1],
            realization_index=discarded[0][0],
        )

    mean_x = np.fft.fftshift(acc_x / n_ok)
    mean_y = np.fft.fftshift(acc_y / n_ok)
    total = mean_x + mean_y
    peak = float(np.max(np.abs(total.real))) or 1.0
    im_residual = float(np.max(np.abs(total.imag))) / peak

    s_e_even = s_e_odd = None
    if n_half[0] > 0 and n_half[1] > 0:
        s_e_even = np.fft.fftshift(acc_half[0] / n_half[0]).real
        s_e_odd = np.fft.fftshift(acc_half[1] / n_half[1]).real

    return EnsembleSpectrum(
        omega=grid.omega_axis_shifted(),
        s_e_x=mean_x.real,
        s_e_y=mean_y.real,
        s_e_total=total.real,
        n_realizations=n_realizations,
        n_ok=n_ok,
        discarded=discarded,
        im_residual=im_residual,
        s_e_even=s_e_even,
        s_e_odd=s_e_odd,
        master_seed=noise.master_seed,
        model=mode,
        window=grid.window,
    )
