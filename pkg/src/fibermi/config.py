"""Scenario configuration files.

Two equivalent formats are accepted: a sectioned ``key = value`` text format
and a JSON object with one member per section.  Dimensioned values carry a
unit suffix (``beta2 = -17 ps^2/km``); compound units combine atoms with
``/``, whitespace products and integer exponents (``2 /W/km``,
``2 W^-1 km^-1``).  Dimensionless values are bare numbers.  ``t_fwhm = cw``
selects a cw pump; angles require an explicit ``rad`` or ``deg``.

Sections and keys:

    [fiber]  lambda0*, beta2*, gamma*, coupling_b,
             beat_length | (delta_beta0, delta_beta1)
    [pulse]  peak_power*, t_fwhm*, theta
    [grid]   mode (explicit|auto), n_time, window, step_size | n_steps
    [noise]  quantum (on|off), classical (none|phase|gaussian),
             photons_per_mode | photons_per_ghz
    [run]    label*, lengths*, realizations, model, plots, seed
    [sweep]  parameter*, values*       (sweep runs only)

Starred keys are required.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .core import FiberParams, PulseSpec
from .noise import NoiseSpec
from .theory import biref_from_beat_length


class ConfigError(ValueError):
    """A scenario file could not be parsed or validated."""


# Dimension vectors: exponents of (meter, second, watt).
DIM_NONE = (0, 0, 0)
DIM_LENGTH = (1, 0, 0)
DIM_TIME = (0, 1, 0)
DIM_POWER = (0, 0, 1)
DIM_BETA2 = (-1, 2, 0)
DIM_GAMMA = (-1, 0, -1)
DIM_INV_LENGTH = (-1, 0, 0)
DIM_GROUP_BIREF = (-1, 1, 0)

_DIM_HINTS = {
    DIM_LENGTH: "m",
    DIM_TIME: "s",
    DIM_POWER: "W",
    DIM_BETA2: "ps^2/km",
    DIM_GAMMA: "/W/km",
    DIM_INV_LENGTH: "/m",
    DIM_GROUP_BIREF: "fs/m",
    DIM_NONE: "(none)",
}

# atom -> (factor to SI, dimension vector)
_UNIT_ATOMS = {
    "1": (1.0, DIM_NONE),
    "m": (1.0, DIM_LENGTH),
    "km": (1e3, DIM_LENGTH),
    "cm": (1e-2, DIM_LENGTH),
    "mm": (1e-3, DIM_LENGTH),
    "um": (1e-6, DIM_LENGTH),
    "µm": (1e-6, DIM_LENGTH),
    "nm": (1e-9, DIM_LENGTH),
    "s": (1.0, DIM_TIME),
    "ms": (1e-3, DIM_TIME),
    "us": (1e-6, DIM_TIME),
    "µs": (1e-6, DIM_TIME),
    "ns": (1e-9, DIM_TIME),
    "ps": (1e-12, DIM_TIME),
    "fs": (1e-15, DIM_TIME),
    "W": (1.0, DIM_POWER),
    "mW": (1e-3, DIM_POWER),
    "kW": (1e3, DIM_POWER),
    "MW": (1e6, DIM_POWER),
    "Hz": (1.0, (0, -1, 0)),
    "kHz": (1e3, (0, -1, 0)),
    "MHz": (1e6, (0, -1, 0)),
    "GHz": (1e9, (0, -1, 0)),
    "THz": (1e12, (0, -1, 0)),
    "J": (1.0, (0, 1, 1)),
}

_ANGLE_ATOMS = {"rad": 1.0, "deg": math.pi / 180.0}


def _parse_unit(unit: str) -> tuple[float, tuple[int, int, int]]:
    factor = 1.0
    dims = [0, 0, 0]
    for chunk_index, chunk in enumerate(unit.split("/")):
        sign = 1 if chunk_index == 0 else -1
        atoms = chunk.split()
        if chunk_index == 0 and not atoms:
            continue  # leading "/": pure reciprocal unit
        if not atoms:
            raise ConfigError(f"empty unit component in {unit!r}")
        for atom in atoms:
            name, caret, exp_text = atom.partition("^")
            try:
                exponent = sign * (int(exp_text) if caret else 1)
            except ValueError:
                raise ConfigError(f"bad exponent {exp_text!r} in unit {unit!r}") from None
            if name not in _UNIT_ATOMS:
                raise ConfigError(f"unknown unit {name!r} in {unit!r}")
            atom_factor, atom_dims = _UNIT_ATOMS[name]
            factor *= atom_factor**exponent
            for i in range(3):
                dims[i] += atom_dims[i] * exponent
    return factor, (dims[0], dims[1], dims[2])


def parse_quantity(text: str, dims: tuple[int, int, int]) -> float:
    """Parse ``"-17 ps^2/km"`` into SI units, checking the dimension."""
    parts = str(text).strip().split(None, 1)
    if not parts:
        raise ConfigError("empty value")
    try:
        value = float(parts[0])
    except ValueError:
        raise ConfigError(f"bad number {parts[0]!r}") from None
    if len(parts) == 1:
        if dims == DIM_NONE:
            return value
        raise ConfigError(
            f"missing unit (expected something like {_DIM_HINTS.get(dims, '?')!r})"
        )
    factor, got = _parse_unit(parts[1])
    if got != dims:
        raise ConfigError(
            f"unit {parts[1]!r} has the wrong dimension "
            f"(expected something like {_DIM_HINTS.get(dims, '?')!r})"
        )
    return value * factor


def parse_angle(text: str) -> float:
    """Parse an angle with a mandatory rad/deg suffix into radians."""
    parts = str(text).strip().split(None, 1)
    if len(parts) != 2 or parts[1] not in _ANGLE_ATOMS:
        raise ConfigError("angles need an explicit unit, e.g. '45 deg' or '0.2 rad'")
    try:
        return float(parts[0]) * _ANGLE_ATOMS[parts[1]]
    except ValueError:
        raise ConfigError(f"bad number {parts[0]!r}") from None


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {text!r}")


def _parse_int(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]


SWEEP_PARAMETERS = {
    "beat_length": DIM_LENGTH,
    "fiber_length": DIM_LENGTH,
    "t_fwhm": DIM_TIME,
    "photons_per_ghz": DIM_NONE,
    "photons_per_mode": DIM_NONE,
}

_SECTION_KEYS = {
    "fiber": {
        "lambda0", "beta2", "gamma", "coupling_b",
        "beat_length", "delta_beta0", "delta_beta1",
    },
    "pulse": {"peak_power", "t_fwhm", "theta"},
    "grid": {"mode", "n_time", "window", "step_size", "n_steps"},
    "noise": {"quantum", "classical", "photons_per_mode", "photons_per_ghz"},
    "run": {"label", "lengths", "realizations", "model", "plots", "seed"},
    "sweep": {"parameter", "values"},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully resolved scenario: SI numbers only."""

    label: str
    fiber: FiberParams
    pulse: PulseSpec
    noise: NoiseSpec
    lengths: tuple[float, ...]
    realizations: int
    model: str
    plots: bool
    seed: int
    grid_mode: str  # "explicit" | "auto"
    n_time: int | None
    window: float | None
    step_size: float | None
    n_steps: int | None
    sweep: SweepSpec | None
    source: str


class _Resolver:
    """Turns raw {section: {key: (text, where)}} into a ScenarioConfig."""

    def __init__(self, raw: dict, source: str):
        self.raw = raw
        self.source = source
        for section, entries in raw.items():
            if section not in _SECTION_KEYS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, (_, where) in entries.items():
                if key not in _SECTION_KEYS[section]:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")

    def _entry(self, section: str, key: str):
        return self.raw.get(section, {}).get(key)

    def has(self, section: str, key: str) -> bool:
        return self._entry(section, key) is not None

    def get(self, section: str, key: str, parser, default=None, required=False):
        entry = self._entry(section, key)
        if entry is None:
            if required:
                raise ConfigError(
                    f"{self.source}: missing required key {key!r} in [{section}]"
                )
            return default
        text, where = entry
        try:
            return parser(text)
        except ConfigError as err:
            raise ConfigError(f"{where}: {key}: {err}") from None

    def resolve(self, expect_sweep: bool) -> ScenarioConfig:
        get = self.get

        lambda0 = get("fiber", "lambda0", lambda t: parse_quantity(t, DIM_LENGTH), required=True)
        beta2 = get("fiber", "beta2", lambda t: parse_quantity(t, DIM_BETA2), required=True)
        gamma = get("fiber", "gamma", lambda t: parse_quantity(t, DIM_GAMMA), required=True)
        coupling_b = get("fiber", "coupling_b", lambda t: parse_quantity(t, DIM_NONE),
                         default=1.0 / 3.0)
        if self.has("fiber", "beat_length"):
            if self.has("fiber", "delta_beta0") or self.has("fiber", "delta_beta1"):
                raise ConfigError(
                    f"{self.source}: [fiber] beat_length excludes "
                    "delta_beta0/delta_beta1"
                )
            beat = get("fiber", "beat_length", lambda t: parse_quantity(t, DIM_LENGTH))
            delta_beta0, delta_beta1 = biref_from_beat_length(beat, lambda0)
        else:
            delta_beta0 = get("fiber", "delta_beta0",
                              lambda t: parse_quantity(t, DIM_INV_LENGTH), default=0.0)
            delta_beta1 = get("fiber", "delta_beta1",
                              lambda t: parse_quantity(t, DIM_GROUP_BIREF), default=0.0)
        try:
            fiber = FiberParams(
                lambda0=lambda0, beta2=beta2, gamma=gamma,
                delta_beta0=delta_beta0, delta_beta1=delta_beta1,
                coupling_b=coupling_b,
            )
        except ValueError as err:
            raise ConfigError(f"{self.source}: [fiber] {err}") from None

        def parse_t_fwhm(text: str) -> float:
            if str(text).strip().lower() == "cw":
                return math.inf
            return parse_quantity(text, DIM_TIME)

        peak_power = get("pulse", "peak_power",
                         lambda t: parse_quantity(t, DIM_POWER), required=True)
        t_fwhm = get("pulse", "t_fwhm", parse_t_fwhm, required=True)
        theta = get("pulse", "theta", parse_angle, default=0.0)
        try:
            pulse = PulseSpec(peak_power=peak_power, t_fwhm=t_fwhm, theta=theta)
        except ValueError as err:
            raise ConfigError(f"{self.source}: [pulse] {err}") from None

        quantum = get("noise", "quantum", _parse_bool, default=True)
        classical = get("noise", "classical", lambda t: str(t).strip().lower(),
                        default="none")
        photons_per_mode = get("noise", "photons_per_mode",
                               lambda t: parse_quantity(t, DIM_NONE))
        photons_per_ghz = get("noise", "photons_per_ghz",
                              lambda t: parse_quantity(t, DIM_NONE))
        seed = get("run", "seed", _parse_int, default=0)
        try:
            noise = NoiseSpec(
                quantum=quantum, classical_model=classical,
                photons_per_mode=photons_per_mode, photons_per_ghz=photons_per_ghz,
                master_seed=seed,
            )
        except ValueError as err:
            raise ConfigError(f"{self.source}: [noise] {err}") from None

        grid_mode = get("grid", "mode", lambda t: str(t).strip().lower(),
                        default="explicit")
        if grid_mode not in ("explicit", "auto"):
            raise ConfigError(f"{self.source}: [grid] mode must be explicit or auto")
        n_time = get("grid", "n_time", _parse_int)
        window = get("grid", "window", lambda t: parse_quantity(t, DIM_TIME))
        step_size = get("grid", "step_size", lambda t: parse_quantity(t, DIM_LENGTH))
        n_steps = get("grid", "n_steps", _parse_int)
        if step_size is not None and n_steps is not None:
            raise ConfigError(f"{self.source}: [grid] give step_size or n_steps, not both")
        if step_size is None and n_steps is None:
            raise ConfigError(f"{self.source}: [grid] needs step_size or n_steps")
        if grid_mode == "explicit" and (n_time is None or window is None):
            raise ConfigError(
                f"{self.source}: [grid] explicit mode needs n_time and window"
            )
        if grid_mode == "auto":
            if n_time is not None or window is not None:
                raise ConfigError(
                    f"{self.source}: [grid] auto mode derives n_time and window; "
                    "remove them"
                )
            if step_size is None:
                raise ConfigError(f"{self.source}: [grid] auto mode needs step_size")

        def parse_lengths(text) -> tuple[float, ...]:
            items = text if isinstance(text, (list, tuple)) else str(text).split(",")
            values = tuple(parse_quantity(item, DIM_LENGTH) for item in items)
            if not values or any(v <= 0.0 for v in values):
                raise ConfigError("lengths must be positive")
            if sorted(values) != list(values):
                raise ConfigError("lengths must be ascending")
            return values

        label = get("run", "label", lambda t: str(t).strip(), required=True)
        lengths = get("run", "lengths", parse_lengths, required=True)
        realizations = get("run", "realizations", _parse_int, default=50)
        if realizations < 1:
            raise ConfigError(f"{self.source}: [run] realizations must be >= 1")
        model = get("run", "model", lambda t: str(t).strip().lower(), default="auto")
        if model not in ("auto", "scalar", "vector"):
            raise ConfigError(f"{self.source}: [run] model must be auto, scalar or vector")
        plots = get("run", "plots", _parse_bool, default=True)

        sweep = None
        if "sweep" in self.raw:
            parameter = get("sweep", "parameter", lambda t: str(t).strip().lower(),
                            required=True)
            if parameter not in SWEEP_PARAMETERS:
                raise ConfigError(
                    f"{self.source}: [sweep] parameter must be one of "
                    f"{sorted(SWEEP_PARAMETERS)}"
                )
            dims = SWEEP_PARAMETERS[parameter]

            def parse_values(text) -> tuple[float, ...]:
                items = text if isinstance(text, (list, tuple)) else str(text).split(",")
                values = tuple(parse_quantity(item, dims) for item in items)
                if not values or any(v <= 0.0 for v in values):
                    raise ConfigError("sweep values must be positive")
                return values

            sweep = SweepSpec(parameter=parameter,
                              values=get("sweep", "values", parse_values, required=True))
            if parameter != "fiber_length" and len(lengths) != 1:
                raise ConfigError(
                    f"{self.source}: [run] a {parameter} sweep needs exactly one entry "
                    "in lengths"
                )
        elif expect_sweep:
            raise ConfigError(f"{self.source}: missing [sweep] section")

        return ScenarioConfig(
            label=label, fiber=fiber, pulse=pulse, noise=noise, lengths=lengths,
            realizations=realizations, model=model, plots=plots, seed=seed,
            grid_mode=grid_mode, n_time=n_time, window=window,
            step_size=step_size, n_steps=n_steps, sweep=sweep, source=self.source,
        )


def _read_text(path: Path) -> dict:
    raw: dict[str, dict] = {}
    section = None
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{path}:{lineno}"
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {stripped!r}")
            section = stripped[1:-1].strip()
            if section in raw:
                raise ConfigError(f"{where}: duplicate section [{section}]")
            raw[section] = {}
        elif "=" in stripped:
            if section is None:
                raise ConfigError(f"{where}: key outside any [section]")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in raw[section]:
                raise ConfigError(f"{where}: duplicate key {key!r}")
            raw[section][key] = (value.strip(), where)
        else:
            raise ConfigError(f"{where}: expected 'key = value' or '[section]'")
    return raw


def _read_json(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object of sections")
    raw: dict[str, dict] = {}
    for section, entries in data.items():
        if not isinstance(entries, dict):
            raise ConfigError(f"{path}: [{section}] must be an object")
        raw[section] = {}
        for key, value in entries.items():
            if isinstance(value, bool):
                value = "on" if value else "off"
            raw[section][key] = (value, f"{path}: [{section}] {key}")
    return raw


def load_config(path: str | Path, *, expect_sweep: bool = False) -> ScenarioConfig:
    """Load and resolve a scenario file (text or .json)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    raw = _read_json(path) if path.suffix.lower() == ".json" else _read_text(path)
    return _Resolver(raw, str(path)).resolve(expect_sweep)


def apply_overrides(
    cfg: ScenarioConfig,
    *,
    seed: int | None = None,
    realizations: int | None = None,
    plots: bool | None = None,
) -> ScenarioConfig:
    """Command-line overrides on a loaded config."""
    if seed is not None:
        cfg = dataclasses.replace(
            cfg, seed=seed, noise=dataclasses.replace(cfg.noise, master_seed=seed)
        )
    if realizations is not None:
        if realizations < 1:
            raise ConfigError(f"realizations must be >= 1, got {realizations}")
        cfg = dataclasses.replace(cfg, realizations=realizations)
    if plots is not None:
        cfg = dataclasses.replace(cfg, plots=plots)
    return cfg
