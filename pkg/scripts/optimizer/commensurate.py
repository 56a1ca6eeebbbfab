"""Pulse duration, Rabi frequency and bias field for commensurate addressing.

A pulse that rotates the addressed ion by the target angle while every
neighbor completes an integer number k of generalized Rabi cycles leaves the
neighbors untouched:

    sqrt(D^2 + W^2) tau = k,   W tau = theta / (2 pi)

with D the next-neighbor detuning and W the Rabi frequency (Hz).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.signal import argrelmin

from ..errors import OptimizationError
from ..register.chain import next_neighbor_detunings, transition_map
from ..register.pulses import channel_detunings, crosstalk_probability
from ..register.types import Channel, FieldConfig, RabiMap, Register

logger = logging.getLogger(__name__)

UNIFORMITY_TOLERANCE = 1e-3
DEFAULT_MAX_HARMONIC = 200


@dataclass(frozen=True)
class OptimizationProblem:
    """Neighbor detunings plus the constraints of the duration search.

    harmonic None means search; bounds are (low, high) in s and Hz.
    """

    detunings_hz: tuple[float, ...]
    target_rotation_rad: float = np.pi
    harmonic: int | None = None
    rabi_target_hz: float | None = None
    tau_bounds_s: tuple[float, float] | None = None
    rabi_bounds_hz: tuple[float, float] | None = None
    max_harmonic: int = DEFAULT_MAX_HARMONIC

    def __post_init__(self) -> None:
        if not self.detunings_hz or any(d == 0 for d in self.detunings_hz):
            raise ValueError("detunings must be non-empty and nonzero")
        if not 0 < self.target_rotation_rad < 2 * np.pi:
            raise ValueError("target_rotation_rad must lie in (0, 2 pi)")
        if self.harmonic is not None and self.harmonic < 1:
            raise ValueError("harmonic must be >= 1")
        for name in ("tau_bounds_s", "rabi_bounds_hz"):
            bounds = getattr(self, name)
            if bounds is not None and not 0 < bounds[0] < bounds[1]:
                raise ValueError(f"{name} must be positive and increasing")
        if self.rabi_target_hz is not None and not self.rabi_target_hz > 0:
            raise ValueError("rabi_target_hz must be positive")

    @property
    def base_detuning_hz(self) -> float:
        return float(np.mean(np.abs(self.detunings_hz)))

    @property
    def rotation_cycles(self) -> float:
        return self.target_rotation_rad / (2 * np.pi)


def optimal_duration(delta_hz: float, k: int, rotation_rad: float = np.pi) -> tuple[float, float]:
    """(tau, Omega) with k full neighbor revolutions and the target rotation on the addressed ion."""
    cycles = rotation_rad / (2 * np.pi)
    if not delta_hz > 0:
        raise ValueError("delta_hz must be positive")
    if k < 1 or k <= cycles:
        raise ValueError("k must be a positive integer above the target rotation in cycles")
    tau = math.sqrt(k * k - cycles * cycles) / delta_hz
    return tau, cycles / tau


def _within(value: float, bounds: tuple[float, float] | None) -> bool:
    return bounds is None or bounds[0] <= value <= bounds[1]


def choose_harmonic(problem: OptimizationProblem) -> int:
    """Fixed harmonic, or the one whose Rabi frequency is closest to the target within bounds.

    Without a target the fastest admissible pulse (smallest k) wins.
    """
    delta = problem.base_detuning_hz
    rotation = problem.target_rotation_rad
    if problem.harmonic is not None:
        tau, omega = optimal_duration(delta, problem.harmonic, rotation)
        if not (_within(tau, problem.tau_bounds_s) and _within(omega, problem.rabi_bounds_hz)):
            raise OptimizationError(f"harmonic {problem.harmonic} gives tau={tau:.4g} s, Omega={omega:.4g} Hz outside bounds")
        return problem.harmonic

    candidates = []
    for k in range(max(1, math.floor(problem.rotation_cycles) + 1), problem.max_harmonic + 1):
        tau, omega = optimal_duration(delta, k, rotation)
        if _within(tau, problem.tau_bounds_s) and _within(omega, problem.rabi_bounds_hz):
            candidates.append((k, omega))
    if not candidates:
        raise OptimizationError(f"no harmonic up to {problem.max_harmonic} satisfies the bounds")
    if problem.rabi_target_hz is None:
        return candidates[0][0]
    return min(candidates, key=lambda item: abs(item[1] - problem.rabi_target_hz))[0]


@dataclass(frozen=True, eq=False)
class BiasSolution:
    bias_t: float
    zero_position_m: float
    base_detuning_hz: float
    multiplier: int
    residuals_hz: np.ndarray  # per ion, pi detuning minus nearest multiple of the base detuning
    uniform: bool

    def field_config(self, gradient_t_per_m: float) -> FieldConfig:
        return FieldConfig(gradient_t_per_m, self.bias_t, self.zero_position_m)


def _nearest_multiple_residual(values: np.ndarray, base: float) -> np.ndarray:
    return values - np.round(values / base) * base


def optimal_bias(register: Register, multiplier: int, *, tolerance: float = UNIFORMITY_TOLERANCE) -> BiasSolution:
    """Bias at ion 1 putting the pi resonance multiplier x D below the ion-1 qubit frequency.

    Non-uniform chains use the mean neighbor detuning and report the residuals.
    """
    if multiplier == 0:
        raise OptimizationError("bias multiplier 0 would put the pi resonance on ion 1's qubit transition")
    if multiplier < 0:
        raise OptimizationError("bias multiplier must be positive")
    if register.ion_count < 2:
        raise OptimizationError("optimal_bias needs at least two ions")
    constants = register.constants
    zero_position = float(register.chain.positions_m[0])
    gradient = register.field.gradient_t_per_m
    reference = transition_map(register.chain, FieldConfig(gradient, 0.0, zero_position), constants)
    detunings = next_neighbor_detunings(reference)
    base = float(np.mean(detunings))
    if not base > 0:
        raise OptimizationError("neighbor detunings vanish; is the field gradient zero?")
    spread = float(np.max(np.abs(detunings - base)) / base)
    uniform = spread <= tolerance
    if not uniform:
        logger.warning("neighbor detunings non-uniform by %.2f%%; using their mean %.6f MHz", spread * 100, base / 1e6)

    bias = multiplier * base / constants.zeeman_coefficient_hz_per_t
    solved = transition_map(register.chain, FieldConfig(gradient, bias, zero_position), constants)
    pi_offsets = solved.sigma_plus_hz - solved.pi_hz
    return BiasSolution(
        bias_t=bias,
        zero_position_m=zero_position,
        base_detuning_hz=base,
        multiplier=multiplier,
        residuals_hz=_nearest_multiple_residual(pi_offsets, base),
        uniform=uniform,
    )


def sigma_commensurability(register: Register, base_detuning_hz: float, qubit: Channel = Channel.SIGMA_PLUS) -> pd.DataFrame:
    """Spectator detunings per channel and their distance from the nearest multiple of the base detuning."""
    if not base_detuning_hz > 0:
        raise ValueError("base_detuning_hz must be positive")
    rows = []
    for i in range(register.ion_count):
        detunings = channel_detunings(register.transitions, register.transitions.frequency(i, qubit))
        for j in range(register.ion_count):
            for channel in Channel:
                if i == j and channel == qubit:
                    continue
                detuning = float(detunings[j, channel])
                rows.append(
                    {
                        "addressed_ion": i + 1,
                        "ion_index": j + 1,
                        "channel": channel.name.lower(),
                        "detuning_hz": detuning,
                        "multiple": int(round(detuning / base_detuning_hz)),
                        "residual_hz": float(_nearest_multiple_residual(np.array(detuning), base_detuning_hz)),
                    }
                )
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class ObjectiveResult:
    taus_s: np.ndarray
    values: np.ndarray
    grid_minimum_s: float
    minimizer_s: float
    minimum: float
    local_minima_s: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _spectator_terms(register: Register, qubit: Channel) -> tuple[np.ndarray, np.ndarray]:
    """Rabi frequencies and detunings of every (addressed, spectator, channel) term, flattened."""
    n = register.ion_count
    rabi, detunings = [], []
    for i in range(n):
        carrier = register.transitions.frequency(i, qubit)
        d = channel_detunings(register.transitions, carrier)
        spectators = np.arange(n) != i
        rabi.append(register.rabi.rabi_hz[spectators].ravel())
        detunings.append(d[spectators].ravel())
    if n < 2:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(rabi), np.concatenate(detunings)


def total_crosstalk(register: Register, tau_s: ArrayLike, qubit: Channel = Channel.SIGMA_PLUS) -> np.ndarray | float:
    """Summed spectator excitation over all addressed ions and spectator channels."""
    rabi, detunings = _spectator_terms(register, qubit)
    taus = np.atleast_1d(np.asarray(tau_s, dtype=float))
    if rabi.size == 0:
        values = np.zeros(taus.shape)
    else:
        values = crosstalk_probability(rabi[None, :], detunings[None, :], taus[:, None]).sum(axis=1)
    return values if np.ndim(tau_s) else float(values[0])


def crosstalk_objective(register: Register, tau_grid: ArrayLike, qubit: Channel = Channel.SIGMA_PLUS) -> ObjectiveResult:
    """Objective over a tau grid, its golden-section refined minimum and all grid local minima."""
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size == 0:
        raise ValueError("tau_grid must not be empty")
    if np.any(taus <= 0):
        raise ValueError("tau_grid must be positive")
    taus = np.sort(taus)
    values = total_crosstalk(register, taus, qubit)
    best = int(np.argmin(values))
    minimizer, minimum = float(taus[best]), float(values[best])
    if 0 < best < taus.size - 1 and values[best] < min(values[best - 1], values[best + 1]):
        refined = minimize_scalar(
            lambda tau: total_crosstalk(register, tau, qubit),
            bracket=(taus[best - 1], taus[best], taus[best + 1]),
            method="golden",
        )
        if refined.fun <= minimum:
            minimizer, minimum = float(refined.x), float(refined.fun)
    local = taus[argrelmin(values)[0]] if taus.size > 2 else np.zeros(0)
    return ObjectiveResult(taus, values, float(taus[best]), minimizer, minimum, local)


@dataclass(frozen=True)
class OptimizerSettings:
    harmonic: int | None = None
    rabi_target_hz: float | None = None
    bias_multiplier: int = 1
    tau_min_s: float | None = None
    tau_max_s: float | None = None
    tau_points: int = 2001
    joint: bool = False
    max_harmonic: int = DEFAULT_MAX_HARMONIC
    max_multiplier: int = 4
    qubit: Channel = Channel.SIGMA_PLUS

    @property
    def tau_bounds_s(self) -> tuple[float, float] | None:
        if self.tau_min_s is None or self.tau_max_s is None:
            return None
        return (self.tau_min_s, self.tau_max_s)


@dataclass(frozen=True, eq=False)
class OptimizationReport:
    tau_s: float
    rabi_hz: float
    harmonic: int
    bias: BiasSolution
    objective: ObjectiveResult
    commensurability: pd.DataFrame
    register: Register

    def to_dict(self) -> dict[str, object]:
        residuals = self.commensurability["residual_hz"].abs()
        return {
            "tau_s": self.tau_s,
            "rabi_hz": self.rabi_hz,
            "harmonic": self.harmonic,
            "bias_t": self.bias.bias_t,
            "zero_position_m": self.bias.zero_position_m,
            "bias_multiplier": self.bias.multiplier,
            "base_detuning_hz": self.bias.base_detuning_hz,
            "detunings_uniform": self.bias.uniform,
            "pi_residuals_hz": [float(r) for r in self.bias.residuals_hz],
            "objective_at_tau": total_crosstalk(self.register, self.tau_s),
            "objective_minimizer_s": self.objective.minimizer_s,
            "objective_minimum": self.objective.minimum,
            "local_minima_s": [float(t) for t in self.objective.local_minima_s],
            "max_commensurability_residual_hz": float(residuals.max()) if len(residuals) else 0.0,
        }


def _register_with(register: Register, bias: BiasSolution, rabi_hz: float, qubit: Channel) -> Register:
    """Register rebuilt on the solved field with the qubit channel driven at rabi_hz."""
    field_config = bias.field_config(register.field.gradient_t_per_m)
    transitions = transition_map(register.chain, field_config, register.constants)
    qubit_rabi = register.rabi.rabi_hz[:, qubit]
    if np.any(qubit_rabi == 0):
        raise OptimizationError("the qubit channel must be driven on every ion")
    rabi = RabiMap(register.rabi.rabi_hz * (rabi_hz / qubit_rabi)[:, None])
    return replace(register, field=field_config, transitions=transitions, rabi=rabi)


def _solve(register: Register, settings: OptimizerSettings, multiplier: int) -> OptimizationReport:
    bias = optimal_bias(register, multiplier)
    problem = OptimizationProblem(
        detunings_hz=(bias.base_detuning_hz,),
        harmonic=settings.harmonic,
        rabi_target_hz=settings.rabi_target_hz,
        tau_bounds_s=settings.tau_bounds_s,
        max_harmonic=settings.max_harmonic,
    )
    k = choose_harmonic(problem)
    tau, omega = optimal_duration(bias.base_detuning_hz, k, problem.target_rotation_rad)
    solved = _register_with(register, bias, omega, settings.qubit)
    half_period = 0.5 / bias.base_detuning_hz
    # one neighbor cycle around tau holds only the chosen harmonic's minimum
    low = settings.tau_min_s or max(tau - half_period, 1e-9)
    high = settings.tau_max_s or tau + half_period
    objective = crosstalk_objective(solved, np.linspace(low, high, settings.tau_points), settings.qubit)
    commensurability = sigma_commensurability(solved, bias.base_detuning_hz, settings.qubit)
    logger.info(
        "multiplier=%d harmonic=%d tau=%.4f us Omega=%.3f kHz bias=%.4f mT",
        multiplier,
        k,
        tau * 1e6,
        omega / 1e3,
        bias.bias_t * 1e3,
    )
    return OptimizationReport(tau, omega, k, bias, objective, commensurability, solved)


def optimize(register: Register, settings: OptimizerSettings) -> OptimizationReport:
    """Bias, harmonic and pulse for one multiplier, or the best over multipliers when joint."""
    if not settings.joint:
        return _solve(register, settings, settings.bias_multiplier)
    reports = [_solve(register, settings, m) for m in range(1, settings.max_multiplier + 1)]
    return min(reports, key=lambda r: total_crosstalk(r.register, r.tau_s, settings.qubit))
