"""Stochastic nonlinear Schrodinger simulator for fiber modulation instability."""

from .analysis import (
    EnsembleSpectrum,
    SidebandReport,
    boxcar_smooth,
    compare_quantum_classical,
    energy_spectral_density,
    photon_number,
    photons_per_mode,
    sideband_peak,
    split_half_scatter_db,
)
from .config import ConfigError, ScenarioConfig, SweepSpec, apply_overrides, load_config
from .core import (
    FiberParams,
    FieldState,
    Grid,
    MaterialParams,
    PhysicsError,
    PulseSpec,
    build_grid,
    check_sampling,
    coupling_ratio,
    from_spectrum,
    gamma_from_material,
    make_gaussian_pump,
    to_spectrum,
    to_spectrum_dag,
)
from .engine import (
    DivergenceError,
    LinearOperator,
    StepReport,
    from_corotating_frame,
    linear_step,
    make_linear_operator,
    nonlinear_step_scalar,
    nonlinear_step_vector,
    propagate_realization,
    resolve_model,
    run_ensemble,
    stochastic_step,
    to_corotating_frame,
)
from .noise import (
    NoiseDraw,
    NoiseSpec,
    apply_classical_noise,
    classical_gaussian_noise,
    classical_phase_noise,
    derive_realization_rng,
    quantum_noise_draw,
    resolve_classical_amplitude,
)
from .scenarios import (
    ScenarioResult,
    SweepResult,
    auto_grid,
    default_band,
    grid_for,
    run_scenario,
    run_sweep,
)
from .theory import (
    BirefringencePrediction,
    ScalarMIPrediction,
    biref_from_beat_length,
    biref_prediction,
    convolved_sideband_prediction,
    eta_ratio,
    half_photon_rescale,
    mi_gain_profile,
    mi_growth_classical,
    mi_growth_quantum,
    monochromatic_sideband_photons,
    scalar_mi_gain,
    walkoff,
)

__version__ = "0.1.0"
