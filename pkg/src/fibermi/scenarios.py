"""Scenario and sweep runners: from a config to CSV spectra, reports, figures.

Per fiber length, ``run_scenario`` writes ``<label>_L<length>m_spectrum.csv``
(one row per frequency bin, 17 significant digits), a sideband report JSON
and, when plots are enabled, a rendered figure; one manifest JSON records the
resolved configuration, grids, seeds, divergence bookkeeping and timing for
the whole run.  ``run_sweep`` writes one summary row per swept value plus a
summary figure.

Output CSV columns: detuning_rad_per_s, detuning_GHz, s_e_x, s_e_y,
s_e_total, n_x, n_y, n_total.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    EnsembleSpectrum,
    SidebandReport,
    photons_per_mode,
    sideband_peak,
    split_half_scatter_db,
)
from .config import ScenarioConfig
from .core import FiberParams, Grid, PhysicsError, PulseSpec, build_grid, check_sampling
from .engine import DivergenceError, run_ensemble
from .theory import biref_from_beat_length, biref_prediction, scalar_mi_gain

log = logging.getLogger("fibermi")

CSV_COLUMNS = (
    "detuning_rad_per_s",
    "detuning_GHz",
    "s_e_x",
    "s_e_y",
    "s_e_total",
    "n_x",
    "n_y",
    "n_total",
)

# Auto-grid sizing: Nyquist headroom target and hard floor over the highest
# phase-matched detuning, and the largest affordable transform.
AUTO_NYQUIST_TARGET = 1.2
AUTO_NYQUIST_FLOOR = 1.05
AUTO_N_TIME_CAP = 2**14


@dataclass(frozen=True)
class ScenarioResult:
    label: str
    out_dir: Path
    lengths: tuple[float, ...]
    spectra: dict[float, EnsembleSpectrum]
    reports: dict[float, SidebandReport]
    csv_paths: dict[float, Path]
    report_paths: dict[float, Path]
    figure_paths: dict[float, Path]
    manifest_path: Path


@dataclass(frozen=True)
class SweepResult:
    label: str
    out_dir: Path
    rows: list[dict]
    summary_path: Path
    figure_path: Path | None
    manifest_path: Path


def _require_window(fiber: FiberParams, pulse: PulseSpec, length: float) -> float:
    window = 0.0 if pulse.is_cw else 8.0 * pulse.sigma_t
    window += abs(fiber.delta_beta1) * length
    if fiber.beta2 * fiber.delta_beta0 > 0.0:
        window += math.sqrt(8.0 * fiber.beta2 * fiber.delta_beta0) * length
    return window


def auto_grid(
    fiber: FiberParams, pulse: PulseSpec, length: float, step_size: float
) -> Grid:
    """Derive a grid from the physics: window rule plus Nyquist headroom.

    The highest detuning that must stay well inside the Nyquist range is the
    scalar MI band edge (anomalous dispersion) or the birefringence
    phase-matching branch including its nonlinear shift (normal dispersion).
    n_time is the smallest power of two supporting both, capped at
    ``AUTO_N_TIME_CAP``.
    """
    targets = []
    gp = fiber.gamma * pulse.peak_power
    if fiber.beta2 < 0.0:
        targets.append(math.sqrt(4.0 * gp / abs(fiber.beta2)))
    if fiber.beta2 > 0.0 and fiber.delta_beta0 > 0.0:
        targets.append(math.sqrt(2.0 * (fiber.delta_beta0 + 2.0 * gp) / fiber.beta2))
    if fiber.beta2 != 0.0 and fiber.delta_beta1 > 0.0:
        targets.append(1.2 * fiber.delta_beta1 / abs(fiber.beta2))
    if not targets:
        targets.append(40.0 * pulse.sigma_omega if not pulse.is_cw else 0.0)
    omega_hi = max(targets)
    if omega_hi <= 0.0:
        raise PhysicsError("auto grid cannot infer a frequency scale; set [grid] explicitly")

    window = 1.05 * _require_window(fiber, pulse, length)
    if window <= 0.0:
        raise PhysicsError("auto grid cannot infer a window for a cw pump; set [grid]")
    tau_target = math.pi / (AUTO_NYQUIST_TARGET * omega_hi)
    n_time = 2 ** max(6, math.ceil(math.log2(window / tau_target)))
    if n_time > AUTO_N_TIME_CAP:
        n_time = AUTO_N_TIME_CAP
        tau = window / n_time
        if math.pi / tau < AUTO_NYQUIST_FLOOR * omega_hi:
            raise PhysicsError(
                f"no affordable grid: window {window:.3e} s and detuning "
                f"{omega_hi:.3e} rad/s need more than {AUTO_N_TIME_CAP} samples"
            )
    n_steps = max(1, round(length / step_size))
    return build_grid(n_time, window, n_steps, length)


def grid_for(cfg: ScenarioConfig, length: float) -> Grid:
    if cfg.grid_mode == "auto":
        return auto_grid(cfg.fiber, cfg.pulse, length, cfg.step_size)
    if cfg.n_steps is not None:
        n_steps = cfg.n_steps
    else:
        n_steps = max(1, round(length / cfg.step_size))
    return build_grid(cfg.n_time, cfg.window, n_steps, length)


def default_band(fiber: FiberParams, pulse: PulseSpec, grid: Grid) -> tuple[float, float]:
    """Positive-detuning analysis band around the expected sidebands."""
    nyq = 0.95 * math.pi / grid.tau
    floor = 10.0 * pulse.sigma_omega
    if fiber.beta2 < 0.0:
        mi = scalar_mi_gain(fiber.gamma, pulse.peak_power, fiber.beta2)
        lo = max(0.25 * mi.omega_max, floor)
        hi = min(1.2 * mi.band_edge, nyq)
    elif fiber.beta2 > 0.0 and fiber.delta_beta0 > 0.0 and (
        math.sqrt(2.0 * fiber.delta_beta0 / fiber.beta2) <= 0.75 * math.pi / grid.tau
    ):
        omega_pm = math.sqrt(2.0 * fiber.delta_beta0 / fiber.beta2)
        omega_hi = math.sqrt(
            2.0 * (fiber.delta_beta0 + 2.0 * fiber.gamma * pulse.peak_power) / fiber.beta2
        )
        lo = max(0.55 * omega_pm, floor)
        hi = min(1.15 * omega_hi, nyq)
    elif fiber.beta2 > 0.0 and fiber.delta_beta1 > 0.0:
        omega_g = fiber.delta_beta1 / fiber.beta2
        lo = max(0.6 * omega_g, floor)
        hi = min(1.4 * omega_g, nyq)
    else:
        lo = max(0.05 * nyq, floor)
        hi = nyq
    if not (hi > lo):
        raise PhysicsError(
            f"analysis band degenerate (lo {lo:.3e}, hi {hi:.3e} rad/s); "
            "the grid cannot resolve the expected sidebands"
        )
    return lo, hi


def _fmt_value(value: float) -> str:
    return f"{value:.16e}"


def _fmt_length(length: float) -> str:
    return f"L{length:g}m"


def _write_spectrum_csv(
    path: Path, spectrum: EnsembleSpectrum, fiber: FiberParams, pulse: PulseSpec
) -> None:
    if pulse.is_cw:
        n_x = n_y = n_total = np.full(spectrum.omega.size, math.nan)
    else:
        n_x = photons_per_mode(spectrum.s_e_x, fiber, pulse)
        n_y = photons_per_mode(spectrum.s_e_y, fiber, pulse)
        n_total = photons_per_mode(spectrum.s_e_total, fiber, pulse)
    ghz = spectrum.omega / (2.0 * math.pi * 1.0e9)
    with path.open("w") as handle:
        handle.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(spectrum.omega.size):
            handle.write(
                ",".join(
                    _fmt_value(v)
                    for v in (
                        spectrum.omega[i], ghz[i],
                        spectrum.s_e_x[i], spectrum.s_e_y[i], spectrum.s_e_total[i],
                        n_x[i], n_y[i], n_total[i],
                    )
                )
                + "\n"
            )


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _predictions(fiber: FiberParams, pulse: PulseSpec, length: float) -> dict:
    out: dict = {}
    if fiber.beta2 < 0.0:
        mi = scalar_mi_gain(fiber.gamma, pulse.peak_power, fiber.beta2, length)
        out["omega_max_rad_per_s"] = mi.omega_max
        out["band_edge_rad_per_s"] = mi.band_edge
        out["peak_gain"] = mi.peak_gain
    biref = biref_prediction(fiber, length)
    if biref.omega_phase_matched is not None:
        out["omega_phase_matched_rad_per_s"] = biref.omega_phase_matched
        out["walkoff_rate_s_per_m"] = biref.walkoff_rate
        out["walkoff_total_s"] = biref.walkoff_total
    if biref.omega_group is not None:
        out["omega_group_rad_per_s"] = biref.omega_group
    return out


def _config_snapshot(cfg: ScenarioConfig) -> dict:
    fiber, pulse, noise = cfg.fiber, cfg.pulse, cfg.noise
    return {
        "label": cfg.label,
        "source": cfg.source,
        "fiber": {
            "lambda0_m": fiber.lambda0,
            "beta2_s2_per_m": fiber.beta2,
            "gamma_per_w_m": fiber.gamma,
            "delta_beta0_per_m": fiber.delta_beta0,
            "delta_beta1_s_per_m": fiber.delta_beta1,
            "coupling_b": fiber.coupling_b,
        },
        "pulse": {
            "peak_power_w": pulse.peak_power,
            "t_fwhm_s": None if pulse.is_cw else pulse.t_fwhm,
            "cw": pulse.is_cw,
            "theta_rad": pulse.theta,
        },
        "noise": {
            "quantum": noise.quantum,
            "classical_model": noise.classical_model,
            "photons_per_mode": noise.photons_per_mode,
            "photons_per_ghz": noise.photons_per_ghz,
        },
        "run": {
            "lengths_m": list(cfg.lengths),
            "realizations": cfg.realizations,
            "model": cfg.model,
            "seed": cfg.seed,
            "plots": cfg.plots,
        },
        "grid": {
            "mode": cfg.grid_mode,
            "n_time": cfg.n_time,
            "window_s": cfg.window,
            "step_size_m": cfg.step_size,
            "n_steps": cfg.n_steps,
        },
    }


def _grid_snapshot(grid: Grid) -> dict:
    return {
        "n_time": grid.n_time,
        "window_s": grid.window,
        "tau_s": grid.tau,
        "n_steps": grid.n_steps,
        "dz_m": grid.dz,
        "length_m": grid.length,
    }


def run_scenario(
    cfg: ScenarioConfig, out_dir: str | Path, *, threads: int = 1
) -> ScenarioResult:
    """Run every configured fiber length and write the report files."""
    if cfg.sweep is not None:
        raise ValueError("config has a [sweep] section; use run_sweep")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    spectra: dict[float, EnsembleSpectrum] = {}
    reports: dict[float, SidebandReport] = {}
    csv_paths: dict[float, Path] = {}
    report_paths: dict[float, Path] = {}
    figure_paths: dict[float, Path] = {}
    per_length_meta = []
    t_start = time.perf_counter()

    for length in cfg.lengths:
        grid = grid_for(cfg, length)
        check_sampling(grid, cfg.fiber, cfg.pulse, list(cfg.lengths))
        band = default_band(cfg.fiber, cfg.pulse, grid)
        log.info(
            "%s %s: n_time=%d window=%.3e s n_steps=%d realizations=%d",
            cfg.label, _fmt_length(length), grid.n_time, grid.window,
            grid.n_steps, cfg.realizations,
        )
        t0 = time.perf_counter()
        spectrum = run_ensemble(
            cfg.fiber, cfg.pulse, grid, cfg.noise, cfg.realizations,
            model=cfg.model, threads=threads, lengths_hint=list(cfg.lengths),
        )
        elapsed = time.perf_counter() - t0
        report = sideband_peak(spectrum, band)
        scatter = split_half_scatter_db(spectrum, band)
        stem = f"{cfg.label}_{_fmt_length(length)}"

        csv_path = out / f"{stem}_spectrum.csv"
        _write_spectrum_csv(csv_path, spectrum, cfg.fiber, cfg.pulse)

        report_path = out / f"{stem}_sidebands.json"
        payload = {
            "label": cfg.label,
            "length_m": length,
            "band_rad_per_s": list(report.band),
            "peak": {
                "detuning_rad_per_s": report.omega_peak,
                "s_e": report.value_peak,
                "structure": report.structure,
                "secondary_detuning_rad_per_s": report.omega_secondary,
                "secondary_s_e": report.value_secondary,
            },
            "predictions": _predictions(cfg.fiber, cfg.pulse, length),
            "ensemble": {
                "model": spectrum.model,
                "n_realizations": spectrum.n_realizations,
                "n_ok": spectrum.n_ok,
                "discarded": spectrum.discarded,
                "im_residual": spectrum.im_residual,
                "scatter_db": scatter,
            },
        }
        report_path.write_text(json.dumps(_json_safe(payload), indent=2) + "\n")

        figure_path = None
        if cfg.plots:
            from .plots import spectrum_figure

            figure_path = out / f"{stem}_spectrum.png"
            spectrum_figure(spectrum, cfg.fiber, cfg.pulse, figure_path,
                            predictions=_predictions(cfg.fiber, cfg.pulse, length))
            figure_paths[length] = figure_path

        spectra[length] = spectrum
        reports[length] = report
        csv_paths[length] = csv_path
        report_paths[length] = report_path
        per_length_meta.append({
            "length_m": length,
            "grid": _grid_snapshot(grid),
            "band_rad_per_s": list(band),
            "files": {
                "spectrum_csv": csv_path.name,
                "sidebands_json": report_path.name,
                "figure_png": figure_path.name if figure_path else None,
            },
            "n_ok": spectrum.n_ok,
            "discarded": spectrum.discarded,
            "im_residual": spectrum.im_residual,
            "scatter_db": scatter,
            "wall_time_s": elapsed,
        })

    manifest_path = out / f"{cfg.label}_manifest.json"
    manifest = {
        "config": _config_snapshot(cfg),
        "lengths": per_length_meta,
        "wall_time_s": time.perf_counter() - t_start,
        "version": _package_version(),
    }
    manifest_path.write_text(json.dumps(_json_safe(manifest), indent=2) + "\n")

    return ScenarioResult(
        label=cfg.label, out_dir=out, lengths=cfg.lengths, spectra=spectra,
        reports=reports, csv_paths=csv_paths, report_paths=report_paths,
        figure_paths=figure_paths, manifest_path=manifest_path,
    )


def _sweep_point_config(cfg: ScenarioConfig, value: float) -> ScenarioConfig:
    parameter = cfg.sweep.parameter
    if parameter == "beat_length":
        db0, db1 = biref_from_beat_length(value, cfg.fiber.lambda0)
        fiber = dataclasses.replace(cfg.fiber, delta_beta0=db0, delta_beta1=db1)
        return dataclasses.replace(cfg, fiber=fiber, sweep=None)
    if parameter == "fiber_length":
        return dataclasses.replace(cfg, lengths=(value,), sweep=None)
    if parameter == "t_fwhm":
        pulse = dataclasses.replace(cfg.pulse, t_fwhm=value)
        return dataclasses.replace(cfg, pulse=pulse, sweep=None)
    if parameter == "photons_per_ghz":
        noise = dataclasses.replace(
            cfg.noise, photons_per_ghz=value, photons_per_mode=None
        )
        return dataclasses.replace(cfg, noise=noise, sweep=None)
    if parameter == "photons_per_mode":
        noise = dataclasses.replace(
            cfg.noise, photons_per_mode=value, photons_per_ghz=None
        )
        return dataclasses.replace(cfg, noise=noise, sweep=None)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def run_sweep(
    cfg: ScenarioConfig, out_dir: str | Path, *, threads: int = 1
) -> SweepResult:
    """Run one ensemble per swept value and write the summary files."""
    if cfg.sweep is None:
        raise ValueError("config has no [sweep] section; use run_scenario")
    if cfg.sweep.parameter in ("photons_per_ghz", "photons_per_mode") and (
        cfg.noise.classical_model == "none"
    ):
        raise ValueError("a classical-seed sweep needs [noise] classical != none")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    per_point_meta = []
    t_start = time.perf_counter()
    for value in cfg.sweep.values:
        point = _sweep_point_config(cfg, value)
        length = point.lengths[-1]
        grid = grid_for(point, length)
        check_sampling(grid, point.fiber, point.pulse, list(point.lengths))
        band = default_band(point.fiber, point.pulse, grid)
        log.info(
            "%s sweep %s=%.6g: n_time=%d window=%.3e s n_steps=%d",
            cfg.label, cfg.sweep.parameter, value, grid.n_time, grid.window,
            grid.n_steps,
        )
        t0 = time.perf_counter()
        # Strongly driven points can shed stochastic realizations; a finer
        # step keeps the trajectories faithful, so halve it and retry.
        for attempt in range(3):
            try:
                spectrum = run_ensemble(
                    point.fiber, point.pulse, grid, point.noise, point.realizations,
                    model=point.model, threads=threads,
                )
                break
            except DivergenceError:
                if attempt == 2:
                    raise
                grid = build_grid(grid.n_time, grid.window, 2 * grid.n_steps, length)
                log.warning(
                    "%s sweep %s=%.6g: realizations diverged; retrying with dz=%.3e m",
                    cfg.label, cfg.sweep.parameter, value, grid.dz,
                )
        elapsed = time.perf_counter() - t0
        report = sideband_peak(spectrum, band, smooth_bins=5)
        scatter = split_half_scatter_db(spectrum, band, smooth_bins=5)
        peak_n = (
            math.nan
            if point.pulse.is_cw
            else float(
                photons_per_mode(np.array([report.value_peak]), point.fiber, point.pulse)[0]
            )
        )
        rows.append({
            "value": value,
            "delta_beta0_per_m": point.fiber.delta_beta0,
            "peak_s_e": report.value_peak,
            "peak_n": peak_n,
            "peak_detuning_rad_per_s": report.omega_peak,
            "structure": report.structure,
        })
        per_point_meta.append({
            "value": value,
            "grid": _grid_snapshot(grid),
            "band_rad_per_s": list(band),
            "n_ok": spectrum.n_ok,
            "discarded": spectrum.discarded,
            "im_residual": spectrum.im_residual,
            "scatter_db": scatter,
            "wall_time_s": elapsed,
        })

    summary_path = out / f"{cfg.label}_sweep_summary.csv"
    with summary_path.open("w") as handle:
        handle.write(
            "value,delta_beta0_per_m,peak_s_e,peak_n,peak_detuning_rad_per_s,structure\n"
        )
        for row in rows:
            handle.write(
                ",".join([
                    _fmt_value(row["value"]),
                    _fmt_value(row["delta_beta0_per_m"]),
                    _fmt_value(row["peak_s_e"]),
                    _fmt_value(row["peak_n"]),
                    _fmt_value(row["peak_detuning_rad_per_s"]),
                    row["structure"],
                ])
                + "\n"
            )

    figure_path = None
    if cfg.plots:
        from .plots import sweep_figure

        figure_path = out / f"{cfg.label}_sweep.png"
        sweep_figure(rows, cfg.sweep.parameter, figure_path)

    manifest_path = out / f"{cfg.label}_sweep_manifest.json"
    manifest = {
        "config": _config_snapshot(cfg),
        "sweep": {
            "parameter": cfg.sweep.parameter,
            "values": list(cfg.sweep.values),
            "points": per_point_meta,
        },
        "wall_time_s": time.perf_counter() - t_start,
        "version": _package_version(),
    }
    manifest_path.write_text(json.dumps(_json_safe(manifest), indent=2) + "\n")

    return SweepResult(
        label=cfg.label, out_dir=out, rows=rows, summary_path=summary_path,
        figure_path=figure_path, manifest_path=manifest_path,
    )


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"
