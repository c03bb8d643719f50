"""Experiment configuration: a small ``key = value`` format with sections.

Grammar::

    # comment
    [section]
    key = value [unit]

Numbers may carry a unit suffix (``dbm``, ``deg``, ``ghz``, ``km``,
``lambda``); a bare number is read in the key's default unit, listed in
``KEYS``.  Lists are comma-separated.  Booleans are ``true``/``false``.
Every value is converted once, at parse time, to SI units (W, rad, Hz, m);
array dimensions stay in wavelengths because the wavelength itself may be
swept.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

from .constellation import EARTH_GM, EARTH_RADIUS
from .frames import SIDEREAL_DAY, SPEED_OF_LIGHT


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class ConstellationBlock:
    planes: int = 6
    sats_per_plane: int = 8
    altitude: float = 550e3  # m
    inclination: float = math.radians(50.0)
    earth_radius: float = EARTH_RADIUS
    gravitational_parameter: float = EARTH_GM
    earth_rotation_period: float = SIDEREAL_DAY


@dataclass(frozen=True)
class RadioBlock:
    frequency: float = 12e9  # Hz
    p_max: float = 10.0  # W
    noise_power: float = dbm_to_watt(-148.0)  # W
    c_min: float = 0.01  # bit/s/Hz
    path_loss_exponent: float = 2.0
    reference_gain: float | None = None  # None: free space at 1 m

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency


@dataclass(frozen=True)
class ArrayBlock:
    elements: int = 4
    side: float = 3.0  # wavelengths
    d_min: float = 0.5  # wavelengths
    init: str = "fpa"


@dataclass(frozen=True)
class GridBlock:
    slots: int = 8
    min_elevation: float = math.radians(10.0)
    gs_latitude: float = math.radians(30.0)
    gs_longitude: float = math.radians(15.0)
    ascending_only: bool = False
    skip_empty: bool = True


@dataclass(frozen=True)
class SolverBlock:
    variants: tuple[str, ...] = ("sca", "de", "fpa")
    max_outer: int = 30
    tol: float = 1e-4
    window: int = 2
    mu: float = 0.05
    position_steps: int = 10
    trust_initial: float = 0.25  # wavelengths
    trust_min: float = 1e-4
    trust_max: float = 1.0
    population: int = 50
    scale_factor: float = 0.9
    crossover_rate: float = 0.9
    generations: int = 30
    repair_cap: int = 50
    de_tie_accept: bool = True
    single_draw_crossover: bool = False
    num_trials: int = 50
    sdr_tol: float = 1e-6
    sdr_max_iterations: int = 30
    expand_at_relaxed: bool = False
    seed: int = 0


@dataclass(frozen=True)
class SweepBlock:
    parameter: str | None = None
    values: tuple = ()


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    timestamps: bool = False
    beam_map_points: int = 61


@dataclass(frozen=True)
class ExperimentConfig:
    constellation: ConstellationBlock = field(default_factory=ConstellationBlock)
    radio: RadioBlock = field(default_factory=RadioBlock)
    array: ArrayBlock = field(default_factory=ArrayBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def with_value(self, key: str, value: Any) -> "ExperimentConfig":
        """Copy with ``section.name`` set to an already converted value."""
        section, name = _split_key(key)
        block = replace(getattr(self, section), **{name: value})
        cfg = replace(self, **{section: block})
        _validate(cfg)
        return cfg

    def get(self, key: str) -> Any:
        section, name = _split_key(key)
        return getattr(getattr(self, section), name)


# ---------------------------------------------------------------------------
# key table: (kind, default unit, allowed suffixes, check)

UNITS: dict[str, Callable[[float], float]] = {
    "dbm": dbm_to_watt,
    "w": lambda v: v,
    "deg": math.radians,
    "rad": lambda v: v,
    "ghz": lambda v: v * 1e9,
    "hz": lambda v: v,
    "km": lambda v: v * 1e3,
    "m": lambda v: v,
    "lambda": lambda v: v,
    "s": lambda v: v,
}


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | bool | str | strlist
    unit: str | None = None
    allowed: tuple[str, ...] = ()
    check: Callable[[Any], bool] | None = None
    rule: str = ""


_pos = (lambda v: v > 0, "must be positive")
_nonneg = (lambda v: v >= 0, "must be non-negative")
_ge1 = (lambda v: v >= 1, "must be >= 1")


def _k(kind, unit=None, allowed=(), check=None):
    fn, rule = check if check else (None, "")
    return Key(kind, unit, allowed or ((unit,) if unit else ()), fn, rule)


KEYS: dict[str, Key] = {
    "constellation.planes": _k("int", check=_ge1),
    "constellation.sats_per_plane": _k("int", check=(lambda v: v >= 2, "must be >= 2")),
    "constellation.altitude": _k("float", "km", ("km", "m"), _pos),
    "constellation.inclination": _k("float", "deg", ("deg", "rad"), (lambda v: 0 < v < math.pi, "must lie in (0, 180) deg")),
    "constellation.earth_radius": _k("float", "km", ("km", "m"), _pos),
    "constellation.gravitational_parameter": _k("float", check=_pos),
    "constellation.earth_rotation_period": _k("float", "s", ("s",), _pos),
    "radio.frequency": _k("float", "ghz", ("ghz", "hz"), _pos),
    "radio.p_max": _k("float", "dbm", ("dbm", "w"), _pos),
    "radio.noise_power": _k("float", "dbm", ("dbm", "w"), _pos),
    "radio.c_min": _k("float", check=_nonneg),
    "radio.path_loss_exponent": _k("float", check=_pos),
    "radio.reference_gain": _k("float", check=_pos),
    "array.elements": _k("int", check=_ge1),
    "array.side": _k("float", "lambda", ("lambda",), _pos),
    "array.d_min": _k("float", "lambda", ("lambda",), _nonneg),
    "array.init": _k("str", check=(lambda v: v in ("fpa", "random"), "must be fpa or random")),
    "grid.slots": _k("int", check=_ge1),
    "grid.min_elevation": _k("float", "deg", ("deg", "rad"), (lambda v: -math.pi / 2 <= v < math.pi / 2, "must lie in [-90, 90) deg")),
    "grid.gs_latitude": _k("float", "deg", ("deg", "rad"), (lambda v: abs(v) <= math.pi / 2, "must lie in [-90, 90] deg")),
    "grid.gs_longitude": _k("float", "deg", ("deg", "rad")),
    "grid.ascending_only": _k("bool"),
    "grid.skip_empty": _k("bool"),
    "solver.variants": _k("strlist", check=(lambda v: len(v) > 0 and all(x in ("sca", "de", "fpa") for x in v), "must list sca, de or fpa")),
    "solver.max_outer": _k("int", check=_nonneg),
    "solver.tol": _k("float", check=_pos),
    "solver.window": _k("int", check=_ge1),
    "solver.mu": _k("float", check=_pos),
    "solver.position_steps": _k("int", check=_ge1),
    "solver.trust_initial": _k("float", "lambda", ("lambda",), _pos),
    "solver.trust_min": _k("float", "lambda", ("lambda",), _pos),
    "solver.trust_max": _k("float", "lambda", ("lambda",), _pos),
    "solver.population": _k("int", check=(lambda v: v >= 4, "must be >= 4")),
    "solver.scale_factor": _k("float", check=(lambda v: 0 < v <= 2, "must lie in (0, 2]")),
    "solver.crossover_rate": _k("float", check=(lambda v: 0 <= v <= 1, "must lie in [0, 1]")),
    "solver.generations": _k("int", check=_nonneg),
    "solver.repair_cap": _k("int", check=_ge1),
    "solver.de_tie_accept": _k("bool"),
    "solver.single_draw_crossover": _k("bool"),
    "solver.num_trials": _k("int", check=_ge1),
    "solver.sdr_tol": _k("float", check=_pos),
    "solver.sdr_max_iterations": _k("int", check=_ge1),
    "solver.expand_at_relaxed": _k("bool"),
    "solver.seed": _k("int", check=_nonneg),
    "sweep.parameter": _k("str"),
    "sweep.values": _k("raw"),
    "output.directory": _k("str"),
    "output.timestamps": _k("bool"),
    "output.beam_map_points": _k("int", check=(lambda v: v >= 2, "must be >= 2")),
}

# shorthand spellings that fix the unit
ALIASES = {
    "radio.power_dbm": ("radio.p_max", "dbm"),
    "radio.noise_dbm": ("radio.noise_power", "dbm"),
    "radio.power": ("radio.p_max", None),
    "radio.noise": ("radio.noise_power", None),
}

_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z]*)$")


def _split_key(key: str) -> tuple[str, str]:
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    section, name = key.split(".", 1)
    return section, name


def convert(key: str, raw: str, line: int | None = None, forced_unit: str | None = None) -> Any:
    """Convert one textual value for ``key`` to its internal representation."""
    spec = KEYS[key]
    raw = raw.strip()
    if spec.kind == "raw":
        return raw
    if spec.kind == "str":
        value: Any = raw
    elif spec.kind == "strlist":
        value = tuple(x.strip().lower() for x in raw.split(",") if x.strip())
    elif spec.kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{key}: expected true or false, got {raw!r}", line)
        value = low in ("true", "yes", "1")
    else:
        m = _NUM.match(raw)
        if not m:
            raise ConfigError(f"{key}: cannot read number from {raw!r}", line)
        number, unit = float(m.group(1)), m.group(2).lower()
        if forced_unit and unit and unit != forced_unit:
            raise ConfigError(f"{key}: unit {unit!r} conflicts with the key's {forced_unit!r}", line)
        unit = unit or forced_unit or spec.unit
        if unit and unit not in UNITS:
            raise ConfigError(f"{key}: unknown unit suffix {unit!r}", line)
        if unit and spec.allowed and unit not in spec.allowed:
            raise ConfigError(f"{key}: unit {unit!r} not allowed (use {', '.join(spec.allowed)})", line)
        if unit and not spec.allowed:
            raise ConfigError(f"{key}: takes a plain number, got unit {unit!r}", line)
        if spec.kind == "int":
            if number != int(number):
                raise ConfigError(f"{key}: expected an integer, got {raw!r}", line)
            value = int(number)
        else:
            value = UNITS[unit](number) if unit else number
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{key} {spec.rule} (got {raw!r})", line)
    return value


def _validate(cfg: ExperimentConfig) -> None:
    s = cfg.solver
    if not s.trust_min <= s.trust_initial <= s.trust_max:
        raise ConfigError("solver: trust_min <= trust_initial <= trust_max required")
    if cfg.array.d_min > cfg.array.side:
        raise ConfigError("array: d_min exceeds the region side")


def sweep_values(cfg: ExperimentConfig) -> list:
    """Converted sweep values (each parsed in the swept key's units)."""
    if cfg.sweep.parameter is None:
        return []
    key = ALIASES.get(cfg.sweep.parameter, (cfg.sweep.parameter, None))
    raw = cfg.sweep.values
    items = raw if isinstance(raw, tuple) else tuple(x for x in str(raw).split(",") if x.strip())
    return [convert(key[0], str(x), forced_unit=key[1]) for x in items]


def sweep_key(cfg: ExperimentConfig) -> str | None:
    if cfg.sweep.parameter is None:
        return None
    return ALIASES.get(cfg.sweep.parameter, (cfg.sweep.parameter, None))[0]


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; omitted keys keep their defaults."""
    values: dict[str, dict[str, Any]] = {}
    section = None
    seen: dict[str, int] = {}
    sweep_line = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in {f.name for f in fields(ExperimentConfig)}:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside any [section]", lineno)
        name, raw = (x.strip() for x in line.split("=", 1))
        full = f"{section}.{name.lower()}"
        forced = None
        if full in ALIASES:
            full, forced = ALIASES[full]
        if full not in KEYS:
            raise ConfigError(f"unknown key {name!r} in [{section}]", lineno)
        if full in seen:
            raise ConfigError(f"{full} already set on line {seen[full]}", lineno)
        seen[full] = lineno
        if full == "sweep.values":
            sweep_line = lineno
        values.setdefault(section, {})[full.split(".", 1)[1]] = convert(full, raw, lineno, forced)
    cfg = ExperimentConfig()
    for sec, kv in values.items():
        cfg = replace(cfg, **{sec: replace(getattr(cfg, sec), **kv)})
    if cfg.sweep.parameter is not None:
        key = sweep_key(cfg)
        if key not in KEYS or key.startswith(("sweep.", "output.")):
            raise ConfigError(f"cannot sweep {cfg.sweep.parameter!r}", seen.get("sweep.parameter"))
        try:
            vals = sweep_values(cfg)
        except ConfigError as exc:
            raise ConfigError(str(exc), sweep_line) from None
        if not vals:
            raise ConfigError("sweep.values is empty", sweep_line or seen.get("sweep.parameter"))
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
