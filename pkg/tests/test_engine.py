from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from fibermi import (
    DivergenceError,
    FiberParams,
    FieldState,
    NoiseSpec,
    PulseSpec,
    build_grid,
    derive_realization_rng,
    from_corotating_frame,
    linear_step,
    make_gaussian_pump,
    make_linear_operator,
    nonlinear_step_scalar,
    nonlinear_step_vector,
    photon_number,
    propagate_realization,
    resolve_model,
    run_ensemble,
    to_corotating_frame,
    to_spectrum,
    to_spectrum_dag,
)
import fibermi.engine as engine_mod

SINH2_3_2 = 4.533830997888882

QUIET = NoiseSpec(quantum=False)


def _scalar_fiber(**kwargs):
    return FiberParams(lambda0=1550e-9, beta2=-17e-27, gamma=2e-3, **kwargs)


def test_linear_step_matches_dispersed_gaussian():
    # A(z, t) = A0 sqrt(T0^2 / (T0^2 - i b2 z)) exp(-t^2 / (2 (T0^2 - i b2 z)))
    grid = build_grid(1024, 40e-12, 20, 100.0)
    fiber = _scalar_fiber()
    t0 = 2e-12
    t = grid.time_axis()
    state = FieldState.vacuum(1024)
    state.ax[:] = np.exp(-(t**2) / (2.0 * t0**2))
    state.ax_dag[:] = np.conj(state.ax)
    op = make_linear_operator(fiber, grid, grid.dz)
    for _ in range(20):
        linear_step(state, op)
    denom = t0**2 - 1j * fiber.beta2 * 100.0
    closed = np.sqrt(t0**2 / denom) * np.exp(-(t**2) / (2.0 * denom))
    assert np.abs(state.ax - closed).max() < 1e-12
    assert np.abs(state.ax_dag - np.conj(closed)).max() < 1e-12


def test_linear_step_advances_slow_axis_toward_positive_time():
    # x is the slow axis: its envelope arrives later by db1 L / 2
    grid = build_grid(2048, 40e-12, 1, 10.0)
    fiber = FiberParams(
        lambda0=1550e-9, beta2=0.0, gamma=2e-3, delta_beta0=0.0, delta_beta1=4e-13
    )
    t = grid.time_axis()
    env = np.exp(-(t**2) / (2.0 * (1.5e-12) ** 2))
    state = FieldState.vacuum(2048)
    state.ax[:] = env
    state.ax_dag[:] = env
    state.ay[:] = env
    state.ay_dag[:] = env
    op = make_linear_operator(fiber, grid, grid.dz)
    linear_step(state, op)
    shift = 0.5 * 4e-13 * 10.0  # 2 ps, ~102 samples
    t_x = float(np.sum(t * np.abs(state.ax) ** 2) / np.sum(np.abs(state.ax) ** 2))
    t_y = float(np.sum(t * np.abs(state.ay) ** 2) / np.sum(np.abs(state.ay) ** 2))
    assert t_x == pytest.approx(shift, rel=1e-6)
    assert t_y == pytest.approx(-shift, rel=1e-6)
    assert state.is_classical()


def test_nonlinear_scalar_exact_kerr_phase():
    grid = build_grid(256, 8e-9, 1, 500.0)
    pulse = PulseSpec(peak_power=2.0, t_fwhm=1e-9)
    state = make_gaussian_pump(pulse, grid)
    power = np.abs(state.ax) ** 2
    nonlinear_step_scalar(state, 2e-3, 500.0)
    expected = np.sqrt(power) * np.exp(1j * 2e-3 * power * 500.0)
    assert np.abs(state.ax - expected).max() < 1e-12
    assert np.abs(state.ax_dag - np.conj(expected)).max() < 1e-12


def test_nonlinear_vector_linear_polarization_common_phase():
    # any linearly polarized field: |u|^2 = |v|^2 = P/2, so both axes pick up
    # the same phase exp(i gamma P dz) independent of B and theta
    grid = build_grid(128, 1e-9, 1, 1.0)
    for theta in (0.0, math.radians(25.0), math.radians(45.0)):
        state = make_gaussian_pump(PulseSpec(5.0, 0.1e-9, theta=theta), grid)
        ax0 = state.ax.copy()
        ay0 = state.ay.copy()
        power = np.abs(ax0) ** 2 + np.abs(ay0) ** 2
        nonlinear_step_vector(state, 0.01, 1.0 / 3.0, 2.0)
        phase = np.exp(1j * 0.01 * power * 2.0)
        assert np.abs(state.ax - ax0 * phase).max() < 1e-12
        assert np.abs(state.ay - ay0 * phase).max() < 1e-12
        assert state.is_classical()


def test_nonlinear_vector_substep_rotation_invariants():
    # independent daggered fields: the circular quadratic forms are complex
    # invariants and the step is an exact complex-angle rotation
    rng = np.random.default_rng(41)
    n = 64
    state = FieldState.vacuum(n)
    for arr in (state.ax, state.ax_dag, state.ay, state.ay_dag):
        arr[:] = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = 0.22
    gamma = 0.7
    dz = 0.31
    inv2 = 1.0 / math.sqrt(2.0)
    u = (state.ax + 1j * state.ay) * inv2
    v = (state.ax - 1j * state.ay) * inv2
    ud = (state.ax_dag - 1j * state.ay_dag) * inv2
    vd = (state.ax_dag + 1j * state.ay_dag) * inv2
    qu = ud * u
    qv = vd * v
    wu = np.exp(1j * gamma * dz * ((1.0 - b) * qu + (1.0 + b) * qv))
    wv = np.exp(1j * gamma * dz * ((1.0 + b) * qu + (1.0 - b) * qv))
    expect_ax = (u * wu + v * wv) * inv2
    expect_ay = -1j * (u * wu - v * wv) * inv2
    expect_axd = (ud / wu + vd / wv) * inv2
    expect_ayd = 1j * (ud / wu - vd / wv) * inv2
    nonlinear_step_vector(state, gamma, b, dz)
    assert np.abs(state.ax - expect_ax).max() < 1e-12 * np.abs(expect_ax).max()
    assert np.abs(state.ay - expect_ay).max() < 1e-12 * np.abs(expect_ay).max()
    assert np.abs(state.ax_dag - expect_axd).max() < 1e-12 * np.abs(expect_axd).max()
    assert np.abs(state.ay_dag - expect_ayd).max() < 1e-12 * np.abs(expect_ayd).max()
    # invariants survive the step
    u2 = (state.ax + 1j * state.ay) * inv2
    ud2 = (state.ax_dag - 1j * state.ay_dag) * inv2
    assert np.abs(ud2 * u2 - qu).max() < 1e-12 * np.abs(qu).max()


def test_vector_model_matches_scalar_for_x_pump():
    grid = build_grid(512, 8e-9, 25, 500.0)
    fiber = _scalar_fiber()
    pulse = PulseSpec(peak_power=2.0, t_fwhm=1e-9)
    scalar = make_gaussian_pump(pulse, grid)
    vector = make_gaussian_pump(pulse, grid)
    propagate_realization(scalar, fiber, grid, QUIET, 0, model="scalar")
    propagate_realization(vector, fiber, grid, QUIET, 0, model="vector")
    scale = np.abs(scalar.ax).max()
    assert np.abs(scalar.ax - vector.ax).max() < 1e-12 * scale
    assert np.abs(scalar.ax_dag - vector.ax_dag).max() < 1e-12 * scale
    assert np.all(vector.ay == 0.0)


def test_corotating_frame_round_trip():
    rng = np.random.default_rng(42)
    fiber = FiberParams(
        lambda0=1550e-9, beta2=60e-27, gamma=2e-3, delta_beta0=2.09,
        delta_beta1=1.72e-15,
    )
    state = FieldState.vacuum(32)
    for arr in (state.ax, state.ax_dag, state.ay, state.ay_dag):
        arr[:] = rng.normal(size=32) + 1j * rng.normal(size=32)
    state.z = 7.3
    reference = state.copy()
    to_corotating_frame(state, fiber)
    assert np.abs(state.ax - reference.ax).max() > 0.1  # frame is not a no-op
    from_corotating_frame(state, fiber)
    for name in ("ax", "ax_dag", "ay", "ay_dag"):
        assert np.abs(getattr(state, name) - getattr(reference, name)).max() < 1e-14


def test_phase_birefringence_inert_without_coupling():
    # with gamma = 0 and db1 = 0 the physical fields cannot depend on db0;
    # the frame phases must cancel the rotation rates exactly
    grid = build_grid(256, 10e-12, 16, 4.0)
    pulse = PulseSpec(peak_power=1.0, t_fwhm=1e-12, theta=math.radians(35.0))
    plain = FiberParams(lambda0=1550e-9, beta2=60e-27, gamma=0.0)
    rotated = FiberParams(lambda0=1550e-9, beta2=60e-27, gamma=0.0, delta_beta0=400.0)
    a = make_gaussian_pump(pulse, grid)
    b = make_gaussian_pump(pulse, grid)
    propagate_realization(a, plain, grid, QUIET, 0, model="vector")
    propagate_realization(b, rotated, grid, QUIET, 0, model="vector")
    assert np.abs(a.ax - b.ax).max() < 1e-12
    assert np.abs(a.ay - b.ay).max() < 1e-12
    assert np.abs(a.ay_dag - b.ay_dag).max() < 1e-12


def _spectral_derivatives(values, omega):
    # odd first-derivative multiplier is zeroed on the self-paired Nyquist bin
    spec = np.fft.fft(values)
    w1 = 1j * omega
    w1[omega.size // 2] = 0.0
    d1 = np.fft.ifft(w1 * spec)
    d2 = np.fft.ifft(-(omega**2) * spec)
    return d1, d2


def test_against_independent_rk4_integration():
    """Engine vs fixed-step RK4 of the four coupled equations written in the
    stationary frame with explicit exp(+-2i db0 z) coupling phases."""
    n = 64
    length = 5.0
    grid = build_grid(n, 10e-12, 200, length)
    beta2 = 60e-27
    db0 = 1.0
    db1 = 2e-13
    gamma = 0.05
    b = 1.0 / 3.0
    fiber = FiberParams(
        lambda0=1550e-9, beta2=beta2, gamma=gamma, delta_beta0=db0,
        delta_beta1=db1, coupling_b=b,
    )
    t = grid.time_axis()
    rng = np.random.default_rng(7)

    def smooth():
        base = np.exp(-(t**2) / (2.0 * (1.5e-12) ** 2))
        mod = rng.normal() + 0.3 * np.cos(2e11 * t + rng.uniform(0, 2 * math.pi))
        return base * (1.0 + 0.2 * mod) * np.exp(0.2j * rng.normal() * base)

    ax = smooth()
    ay = 0.8 * smooth()
    ax_dag = np.conj(ax) + 0.05 * smooth()
    ay_dag = np.conj(ay) - 0.03 * smooth()

    state = FieldState.vacuum(n)
    state.ax[:] = ax
    state.ax_dag[:] = ax_dag
    state.ay[:] = ay
    state.ay_dag[:] = ay_dag
    propagate_realization(state, fiber, grid, QUIET, 0, model="vector")

    omega = grid.omega_axis()

    def rhs(z, f):
        fx, fxd, fy, fyd = f
        dx1, dx2 = _spectral_derivatives(fx, omega)
        dxd1, dxd2 = _spectral_derivatives(fxd, omega)
        dy1, dy2 = _spectral_derivatives(fy, omega)
        dyd1, dyd2 = _spectral_derivatives(fyd, omega)
        rot = np.exp(-2j * db0 * z)
        sx = fxd * fx + (1.0 - b) * fyd * fy
        sy = fyd * fy + (1.0 - b) * fxd * fx
        return np.array([
            -0.5 * db1 * dx1 - 0.5j * beta2 * dx2
            + 1j * gamma * (sx * fx + b * fy**2 * fxd * rot),
            -0.5 * db1 * dxd1 + 0.5j * beta2 * dxd2
            - 1j * gamma * (sx * fxd + b * fyd**2 * fx / rot),
            +0.5 * db1 * dy1 - 0.5j * beta2 * dy2
            + 1j * gamma * (sy * fy + b * fx**2 * fyd / rot),
            +0.5 * db1 * dyd1 + 0.5j * beta2 * dyd2
            - 1j * gamma * (sy * fyd + b * fxd**2 * fy * rot),
        ])

    f = np.array([ax, ax_dag, ay, ay_dag])
    n_rk = 2000
    h = length / n_rk
    z = 0.0
    for _ in range(n_rk):
        k1 = rhs(z, f)
        k2 = rhs(z + 0.5 * h, f + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h, f + 0.5 * h * k2)
        k4 = rhs(z + h, f + h * k3)
        f = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        z += h

    scale = max(np.abs(f[i]).max() for i in range(4))
    assert np.abs(state.ax - f[0]).max() < 5e-6 * scale
    assert np.abs(state.ax_dag - f[1]).max() < 5e-6 * scale
    assert np.abs(state.ay - f[2]).max() < 5e-6 * scale
    assert np.abs(state.ay_dag - f[3]).max() < 5e-6 * scale


def test_step_halving_is_second_order():
    fiber = FiberParams(
        lambda0=1550e-9, beta2=60e-27, gamma=2e-3, delta_beta0=2.09,
        delta_beta1=1.72e-15,
    )
    pulse = PulseSpec(peak_power=400.0, t_fwhm=0.1e-9, theta=math.radians(10.0))

    def run(n_steps):
        grid = build_grid(512, 0.4096e-9, n_steps, 16.0)
        state = make_gaussian_pump(pulse, grid)
        propagate_realization(state, fiber, grid, QUIET, 0, model="vector")
        return state

    coarse = run(50)
    halved = run(100)
    fine = run(1600)
    err_coarse = np.abs(coarse.ax - fine.ax).max() + np.abs(coarse.ay - fine.ay).max()
    err_halved = np.abs(halved.ax - fine.ax).max() + np.abs(halved.ay - fine.ay).max()
    assert 3.0 < err_coarse / err_halved < 5.0


def test_deterministic_run_stays_classical():
    fiber = FiberParams(
        lambda0=1064e-9, beta2=30e-27, gamma=2e-3, delta_beta0=628.3185307179587,
        delta_beta1=354.91e-15,
    )
    grid = build_grid(512, 0.7e-9, 100, 10.0)
    state = make_gaussian_pump(PulseSpec(300.0, 0.2e-9, theta=math.pi / 4), grid)
    propagate_realization(state, fiber, grid, QUIET, 0, model="vector")
    assert state.is_classical()
    assert state.z == pytest.approx(10.0)


@pytest.mark.parametrize("model", ["scalar", "vector"])
def test_mean_photon_number_conserved_with_quantum_noise(model):
    if model == "scalar":
        fiber = _scalar_fiber()
        pulse = PulseSpec(peak_power=2.0, t_fwhm=0.25e-9)
        grid = build_grid(256, 2e-9, 40, 200.0)
    else:
        fiber = FiberParams(
            lambda0=1550e-9, beta2=60e-27, gamma=2e-3, delta_beta0=2.09,
            delta_beta1=1.72e-15,
        )
        pulse = PulseSpec(peak_power=400.0, t_fwhm=0.1e-9, theta=math.radians(30.0))
        grid = build_grid(256, 0.4096e-9, 160, 8.0)
    noise = NoiseSpec(quantum=True, master_seed=12)
    n0 = photon_number(make_gaussian_pump(pulse, grid), grid, fiber.photon_energy)
    deltas = []
    for r in range(120):
        state = make_gaussian_pump(pulse, grid)
        propagate_realization(
            state, fiber, grid, noise, derive_realization_rng(12, r), model=model
        )
        deltas.append(photon_number(state, grid, fiber.photon_energy) - n0)
    deltas = np.asarray(deltas)
    stderr = float(np.std(deltas, ddof=1)) / math.sqrt(len(deltas))
    assert abs(float(np.mean(deltas))) < max(4.0 * stderr, 1e-9 * n0)


def test_cw_vacuum_sideband_growth_matches_parametric_gain():
    # cw pump, gamma P0 L = 1.5: the ensemble spectrum at the gain peak
    # approaches hbar omega0 T_win sinh^2(1.5)
    fiber = FiberParams(lambda0=1550e-9, beta2=-17e-27, gamma=2e-3)
    pulse = PulseSpec(peak_power=3.0, t_fwhm=math.inf)
    grid = build_grid(1024, 2e-9, 50, 250.0)
    noise = NoiseSpec(quantum=True, master_seed=33)
    result = run_ensemble(fiber, pulse, grid, noise, 60, model="scalar")
    omega_max = math.sqrt(2.0 * 2e-3 * 3.0 / 17e-27)
    expected = fiber.photon_energy * grid.window * SINH2_3_2
    measured = []
    for sign in (+1.0, -1.0):
        center = int(np.argmin(np.abs(result.omega - sign * omega_max)))
        measured.extend(result.s_e_total[center - 3 : center + 4])
    mean = float(np.mean(measured))
    assert mean == pytest.approx(expected, rel=0.25)


def test_run_ensemble_thread_count_does_not_change_results():
    fiber = _scalar_fiber()
    pulse = PulseSpec(peak_power=2.0, t_fwhm=0.25e-9)
    grid = build_grid(1024, 2e-9, 20, 100.0)
    noise = NoiseSpec(quantum=True, master_seed=5)
    serial = run_ensemble(fiber, pulse, grid, noise, 9, model="scalar", threads=1)
    pooled = run_ensemble(fiber, pulse, grid, noise, 9, model="scalar", threads=3)
    assert np.array_equal(serial.s_e_total, pooled.s_e_total)
    assert np.array_equal(serial.s_e_x, pooled.s_e_x)
    assert serial.n_ok == pooled.n_ok == 9
    repeat = run_ensemble(fiber, pulse, grid, noise, 9, model="scalar", threads=1)
    assert np.array_equal(serial.s_e_total, repeat.s_e_total)


def test_imaginary_residual_shrinks_with_ensemble_size():
    fiber = _scalar_fiber()
    pulse = PulseSpec(peak_power=2.0, t_fwhm=0.25e-9)
    grid = build_grid(1024, 2e-9, 25, 300.0)
    noise = NoiseSpec(quantum=True, master_seed=8)
    small = run_ensemble(fiber, pulse, grid, noise, 10, model="scalar")
    large = run_ensemble(fiber, pulse, grid, noise, 160, model="scalar")
    assert small.im_residual > 0.0
    assert large.im_residual < 0.8 * small.im_residual


def test_divergence_raises_with_step_index():
    fiber = FiberParams(lambda0=1550e-9, beta2=-17e-27, gamma=5e4)
    grid = build_grid(64, 1e-11, 50, 100.0)
    pulse = PulseSpec(peak_power=50.0, t_fwhm=2e-12)
    noise = NoiseSpec(quantum=True, master_seed=1)
    state = make_gaussian_pump(pulse, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError) as info:
                propagate_realization(
                    state, fiber, grid, noise, derive_realization_rng(1, 0),
                    model="scalar",
                )
    assert 0 <= info.value.step_index < 50


def test_run_ensemble_divergence_policy(monkeypatch):
    fiber = _scalar_fiber()
    pulse = PulseSpec(peak_power=2.0, t_fwhm=0.25e-9)
    grid = build_grid(1024, 2e-9, 5, 25.0)
    noise = NoiseSpec(quantum=True, master_seed=2)
    original = engine_mod.propagate_realization

    def flaky(state, fiber_, grid_, noise_, rng, model="vector", fail_set=frozenset()):
        if flaky.counter in flaky.fail_on:
            flaky.counter += 1
            raise DivergenceError("synthetic", step_index=0, realization_index=0)
        flaky.counter += 1
        return original(state, fiber_, grid_, noise_, rng, model=model)

    # 2 failures out of 30 (6.7%): kept, reported in `discarded`
    flaky.counter = 0
    flaky.fail_on = {3, 11}
    monkeypatch.setattr(engine_mod, "propagate_realization", flaky)
    result = run_ensemble(fiber, pulse, grid, noise, 30, model="scalar")
    assert result.n_ok == 28
    assert len(result.discarded) == 2

    # 5 failures out of 30 (17%): aborts
    flaky.counter = 0
    flaky.fail_on = {0, 1, 2, 3, 4}
    with pytest.raises(DivergenceError):
        run_ensemble(fiber, pulse, grid, noise, 30, model="scalar")


def test_resolve_model_auto_branches():
    iso = _scalar_fiber()
    biref = FiberParams(
        lambda0=1550e-9, beta2=60e-27, gamma=2e-3, delta_beta0=2.09,
        delta_beta1=1.72e-15,
    )
    x_pump = PulseSpec(peak_power=2.0, t_fwhm=1e-9)
    tilted = PulseSpec(peak_power=2.0, t_fwhm=1e-9, theta=math.radians(45.0))
    assert resolve_model("auto", iso, x_pump) == "scalar"
    assert resolve_model("auto", iso, tilted) == "vector"
    assert resolve_model("auto", biref, x_pump) == "vector"
    assert resolve_model("scalar", biref, x_pump) == "scalar"
    assert resolve_model("vector", iso, x_pump) == "vector"
    with pytest.raises(ValueError):
        resolve_model("other", iso, x_pump)


def test_scalar_model_rejects_y_content():
    fiber = _scalar_fiber()
    grid = build_grid(64, 1e-9, 4, 4.0)
    state = make_gaussian_pump(PulseSpec(2.0, 0.1e-9, theta=0.3), grid)
    with pytest.raises(ValueError):
        propagate_realization(state, fiber, grid, QUIET, 0, model="scalar")
