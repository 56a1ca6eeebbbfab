"""Run configuration: TOML loading, schema validation and object builders.

Ion numbers are 1-based in config files and 0-based everywhere inside the
package.
"""
from __future__ import annotations

import hashlib
import logging
import re
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .benchmark.runner import BenchmarkPlan
from .benchmark.types import InputState, ReadoutModel
from .errors import ConfigError
from .register.chain import equilibrium_positions, transition_map
from .register.types import (
    Channel,
    CouplingConfig,
    FieldConfig,
    PhysicalConstants,
    RabiMap,
    Register,
    SidebandConfig,
    TrapConfig,
)

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "data" / "configs"

_NUMBER = "number"
_INT = "int"
_BOOL = "bool"
_STR = "str"
_NUMBERS = "numbers"  # number or list of numbers
_INT_LIST = "int_list"
_NUMBER_LIST = "number_list"
_HARMONIC = "harmonic"  # positive int or "search"

SCHEMA: dict[str, dict[str, str]] = {
    "trap": {"ion_count": _INT, "secular_frequency_hz": _NUMBER, "ion_species": _STR},
    "field": {"gradient_t_per_m": _NUMBER, "bias_t": _NUMBER, "zero_position_m": _NUMBER},
    "constants": {"zeeman_coefficient_hz_per_t": _NUMBER, "hyperfine_splitting_hz": _NUMBER},
    "pulses": {
        "rabi_hz": _NUMBERS,
        "pi_weight": _NUMBER,
        "sigma_plus_weight": _NUMBER,
        "sigma_minus_weight": _NUMBER,
        "duration_s": _NUMBER,
    },
    "benchmark": {
        "n_values": _INT_LIST,
        "trials": _INT,
        "seed": _INT,
        "input_state": _STR,
        "addressed_ions": _INT_LIST,
        "qubit": _STR,
        "carrier_offset_hz": _NUMBER,
        "durations_s": _NUMBER_LIST,
        "chunk_size": _INT,
    },
    "model": {
        "j_enabled": _BOOL,
        "j_nearest_neighbor_hz": _NUMBER,
        "sideband_eta": _NUMBER,
        "mean_phonon_number": _NUMBER,
        "mode_frequency_hz": _NUMBER,
        "readout_p": _NUMBERS,
        "readout_p_bright": _NUMBERS,
    },
    "spectrum": {"duration_s": _NUMBER, "margin_hz": _NUMBER, "step_hz": _NUMBER},
    "rabi": {"addressed_ion": _INT, "max_duration_s": _NUMBER, "points": _INT},
    "optimizer": {
        "harmonic": _HARMONIC,
        "rabi_target_hz": _NUMBER,
        "bias_multiplier": _INT,
        "tau_min_s": _NUMBER,
        "tau_max_s": _NUMBER,
        "tau_points": _INT,
        "joint": _BOOL,
        "max_harmonic": _INT,
        "max_multiplier": _INT,
    },
    "scaling": {
        "rabi_ratio": _NUMBER,
        "gradient_ratio": _NUMBER,
        "secular_ratio": _NUMBER,
        "detuning_hz": _NUMBER,
        "j_hz": _NUMBER,
    },
    "oracle": {"crosstalk_values": _NUMBER_LIST, "n_pulses": _INT, "walkers": _INT, "trials": _INT},
}
REQUIRED: dict[str, tuple[str, ...]] = {
    "trap": ("ion_count", "secular_frequency_hz"),
    "field": ("gradient_t_per_m", "bias_t"),
}
DEFAULT_N_VALUES = (0, 250, 500, 750, 1000, 1250)
MAX_SEED = 2**64 - 1


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


_CHECKS = {
    _NUMBER: _is_number,
    _INT: _is_int,
    _BOOL: lambda v: isinstance(v, bool),
    _STR: lambda v: isinstance(v, str),
    _NUMBERS: lambda v: _is_number(v) or (isinstance(v, list) and bool(v) and all(_is_number(x) for x in v)),
    _INT_LIST: lambda v: isinstance(v, list) and bool(v) and all(_is_int(x) for x in v),
    _NUMBER_LIST: lambda v: isinstance(v, list) and all(_is_number(x) for x in v),
    _HARMONIC: lambda v: (_is_int(v) and v >= 1) or v == "search",
}
_EXPECTED = {
    _NUMBER: "a number",
    _INT: "an integer",
    _BOOL: "true or false",
    _STR: "a string",
    _NUMBERS: "a number or a non-empty list of numbers",
    _INT_LIST: "a non-empty list of integers",
    _NUMBER_LIST: "a list of numbers",
    _HARMONIC: 'a positive integer or "search"',
}


def _locate(text: str, section: str, key: str | None = None) -> int | None:
    """1-based line of a section header or of a key inside it."""
    current = None
    header = re.compile(r"^\s*\[\s*([A-Za-z0-9_]+)\s*\]")
    for lineno, line in enumerate(text.splitlines(), start=1):
        match = header.match(line)
        if match:
            current = match.group(1)
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return lineno
    return None


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with its source text and digest."""

    path: Path
    text: str
    sha256: str
    sections: dict[str, dict[str, Any]]

    def section(self, name: str) -> dict[str, Any]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.section(section).get(key, default)

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        line = _locate(self.text, section, key)
        where = f"{self.path}:{line}" if line else str(self.path)
        target = f"[{section}]" + (f" {key}" if key else "")
        return ConfigError(f"{where}: {target}: {message}")


def parse_config(text: str, path: Path | str = "<string>") -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    config = RunConfig(
        path=path,
        text=text,
        sha256=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        sections={},
    )
    for section, values in raw.items():
        if section not in SCHEMA:
            raise config.error(section, None, f"unknown section; expected one of {', '.join(SCHEMA)}")
        if not isinstance(values, dict):
            raise config.error(section, None, "must be a table")
        for key, value in values.items():
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise config.error(section, key, "unknown key")
            if not _CHECKS[kind](value):
                raise config.error(section, key, f"must be {_EXPECTED[kind]}")
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in raw.get(section, {}):
                raise config.error(section, None, f"missing required key {key!r}")
    config.sections.update(raw)
    _check_ranges(config)
    return config


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    config = parse_config(text, path)
    logger.debug("loaded config %s (sha256 %s)", path, config.sha256[:12])
    return config


def _check_ranges(config: RunConfig) -> None:
    ion_count = config.get("trap", "ion_count")
    if ion_count < 1:
        raise config.error("trap", "ion_count", "must be >= 1")
    positive = [
        ("trap", "secular_frequency_hz"),
        ("constants", "zeeman_coefficient_hz_per_t"),
        ("constants", "hyperfine_splitting_hz"),
        ("model", "mode_frequency_hz"),
        ("pulses", "duration_s"),
        ("benchmark", "trials"),
        ("benchmark", "chunk_size"),
        ("spectrum", "duration_s"),
        ("spectrum", "step_hz"),
        ("rabi", "max_duration_s"),
        ("rabi", "points"),
        ("optimizer", "rabi_target_hz"),
        ("optimizer", "tau_min_s"),
        ("optimizer", "tau_max_s"),
        ("optimizer", "tau_points"),
        ("optimizer", "max_harmonic"),
        ("optimizer", "max_multiplier"),
        ("scaling", "rabi_ratio"),
        ("scaling", "gradient_ratio"),
        ("scaling", "secular_ratio"),
        ("scaling", "detuning_hz"),
        ("oracle", "n_pulses"),
        ("oracle", "walkers"),
        ("oracle", "trials"),
    ]
    for section, key in positive:
        value = config.get(section, key)
        if value is not None and not value > 0:
            raise config.error(section, key, "must be positive")
    non_negative = [
        ("field", "gradient_t_per_m"),
        ("pulses", "pi_weight"),
        ("pulses", "sigma_plus_weight"),
        ("pulses", "sigma_minus_weight"),
        ("model", "sideband_eta"),
        ("model", "mean_phonon_number"),
        ("spectrum", "margin_hz"),
        ("scaling", "j_hz"),
    ]
    for section, key in non_negative:
        value = config.get(section, key)
        if value is not None and value < 0:
            raise config.error(section, key, "must be >= 0")

    rabi_hz = config.get("pulses", "rabi_hz")
    if isinstance(rabi_hz, list) and len(rabi_hz) != ion_count:
        raise config.error("pulses", "rabi_hz", f"has {len(rabi_hz)} values for {ion_count} ions")
    if rabi_hz is not None and np.any(np.asarray(rabi_hz) < 0):
        raise config.error("pulses", "rabi_hz", "must be >= 0")
    for key in ("addressed_ions",):
        ions = config.get("benchmark", key)
        if ions is not None and any(not 1 <= i <= ion_count for i in ions):
            raise config.error("benchmark", key, f"ion numbers must lie in 1..{ion_count}")
    addressed = config.get("rabi", "addressed_ion")
    if addressed is not None and not 1 <= addressed <= ion_count:
        raise config.error("rabi", "addressed_ion", f"must lie in 1..{ion_count}")
    n_values = config.get("benchmark", "n_values")
    if n_values is not None and (any(n < 0 for n in n_values) or len(set(n_values)) != len(n_values)):
        raise config.error("benchmark", "n_values", "must be unique and >= 0")
    seed = config.get("benchmark", "seed")
    if seed is not None and not 0 <= seed <= MAX_SEED:
        raise config.error("benchmark", "seed", "must be an unsigned 64-bit integer")
    input_state = config.get("benchmark", "input_state")
    if input_state is not None and input_state not in {s.value for s in InputState}:
        raise config.error("benchmark", "input_state", "must be 'eigenstate' or 'superposition'")
    qubit = config.get("benchmark", "qubit")
    if qubit is not None:
        try:
            Channel.from_name(qubit)
        except ValueError as exc:
            raise config.error("benchmark", "qubit", str(exc)) from None
    if any(d <= 0 for d in config.get("benchmark", "durations_s", [])):
        raise config.error("benchmark", "durations_s", "must be positive")
    for key in ("readout_p", "readout_p_bright"):
        value = config.get("model", key)
        if value is None:
            continue
        values = np.atleast_1d(np.asarray(value, dtype=float))
        if values.size not in (1, ion_count):
            raise config.error("model", key, f"needs 1 or {ion_count} values")
        if np.any(values <= 0.5) or np.any(values > 1.0):
            raise config.error("model", key, "must lie in (0.5, 1]")
    tau_min, tau_max = config.get("optimizer", "tau_min_s"), config.get("optimizer", "tau_max_s")
    if tau_min is not None and tau_max is not None and not tau_min < tau_max:
        raise config.error("optimizer", "tau_max_s", "must exceed tau_min_s")
    if any(not 0 <= c < 0.25 for c in config.get("oracle", "crosstalk_values", [])):
        raise config.error("oracle", "crosstalk_values", "must lie in [0, 0.25)")


def build_constants(config: RunConfig) -> PhysicalConstants:
    try:
        return PhysicalConstants(**config.section("constants"))
    except ValueError as exc:
        raise config.error("constants", None, str(exc)) from None


def build_register(config: RunConfig) -> Register:
    """Solve the chain and assemble transitions, Rabi map and model options."""
    constants = build_constants(config)
    trap_section = config.section("trap")
    try:
        trap = TrapConfig.for_species(
            trap_section.get("ion_species", "171Yb+"),
            float(trap_section["secular_frequency_hz"]),
            int(trap_section["ion_count"]),
        )
    except ValueError as exc:
        raise config.error("trap", "ion_species", str(exc)) from None
    try:
        field = FieldConfig(**{k: float(v) for k, v in config.section("field").items()})
    except ValueError as exc:
        raise config.error("field", None, str(exc)) from None
    chain = equilibrium_positions(trap, constants)
    transitions = transition_map(chain, field, constants)

    pulses = config.section("pulses")
    try:
        rabi = RabiMap.from_weights(
            pulses.get("rabi_hz", 20e3),
            trap.ion_count,
            pi_weight=pulses.get("pi_weight", 1.0),
            sigma_plus_weight=pulses.get("sigma_plus_weight", 1.0),
            sigma_minus_weight=pulses.get("sigma_minus_weight", 1.0),
        )
    except ValueError as exc:
        raise config.error("pulses", None, str(exc)) from None

    model = config.section("model")
    try:
        coupling = CouplingConfig.nearest_neighbor(
            trap.ion_count,
            float(model.get("j_nearest_neighbor_hz", 0.0)),
            enabled=bool(model.get("j_enabled", False)),
        )
        sideband = SidebandConfig(
            mode_frequency_hz=float(model.get("mode_frequency_hz", trap.secular_frequency_hz)),
            mean_phonon_number=float(model.get("mean_phonon_number", 150.0)),
            effective_lamb_dicke=float(model.get("sideband_eta", 0.0)),
        )
    except ValueError as exc:
        raise config.error("model", None, str(exc)) from None
    return Register(constants, trap, field, chain, transitions, rabi, coupling, sideband)


def build_plan(
    config: RunConfig,
    *,
    seed: int | None = None,
    trials: int | None = None,
    threads: int = 1,
) -> BenchmarkPlan:
    """Benchmark plan with CLI overrides applied; addressed ions converted to 0-based."""
    bench = config.section("benchmark")
    ion_count = int(config.get("trap", "ion_count"))
    addressed = bench.get("addressed_ions", list(range(1, ion_count + 1)))
    try:
        return BenchmarkPlan(
            addressed_ions=tuple(i - 1 for i in addressed),
            n_values=tuple(bench.get("n_values", DEFAULT_N_VALUES)),
            trials=int(trials if trials is not None else bench.get("trials", 1600)),
            seed=int(seed if seed is not None else bench.get("seed", 0)),
            pulse_duration_s=float(config.get("pulses", "duration_s", 25e-6)),
            input_state=InputState(bench.get("input_state", "eigenstate")),
            qubit=Channel.from_name(bench.get("qubit", "sigma_plus")),
            carrier_offset_hz=float(bench.get("carrier_offset_hz", 0.0)),
            chunk_size=int(bench.get("chunk_size", 256)),
            threads=threads,
            durations_s=tuple(float(d) for d in bench.get("durations_s", [])),
        )
    except ValueError as exc:
        raise config.error("benchmark", None, str(exc)) from None


def build_readout(config: RunConfig) -> ReadoutModel:
    model = config.section("model")

    def _value(key: str) -> float | tuple[float, ...] | None:
        value = model.get(key)
        return tuple(value) if isinstance(value, list) else value

    return ReadoutModel(p_prep=_value("readout_p") or 1.0, p_prep_bright=_value("readout_p_bright"))
