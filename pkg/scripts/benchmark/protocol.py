"""Randomized-phase pulse sequences, Ramsey wrapper and projective readout.

Sequences are simulated for a batch of trials at once: amplitudes have shape
(trial, ion, level) and every trial draws its own phase stream.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..register.pulses import (
    channel_detunings,
    frame_phases,
    j_coupling_phase,
    propagator,
    pulse_hamiltonian,
)
from ..register.types import (
    LEVEL_0,
    LEVEL_COUNT,
    Channel,
    CouplingConfig,
    IonChain,
    RabiMap,
    RegisterState,
    TransitionSet,
)
from .types import IdealRotation, InputState, ProtocolStep, PulseTrain, ReadoutModel, SequenceSpec, TrialResult

logger = logging.getLogger(__name__)

PHASE_SET = np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
PURPOSE_PHASES = 0
PURPOSE_READOUT = 1
OFF_RESONANCE_FACTOR = 1e3


def derive_seed(master_seed: int, *key: int) -> int:
    """Independent 64-bit seed for one (master, key...) combination."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, purpose: int) -> np.random.Generator:
    """Counter-based generator dedicated to one purpose of one trial."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(purpose,))))


def random_phase_indices(spec: SequenceSpec) -> np.ndarray:
    return stream(spec.seed, PURPOSE_PHASES).integers(0, len(PHASE_SET), size=spec.pulse_count)


def random_phases(spec: SequenceSpec) -> np.ndarray:
    return PHASE_SET[random_phase_indices(spec)]


def eigenstate_protocol(spec: SequenceSpec) -> tuple[ProtocolStep, ...]:
    return (PulseTrain(0, spec.pulse_count),)


def ramsey_wrap(spec: SequenceSpec, channel: Channel = Channel.PI) -> tuple[ProtocolStep, ...]:
    """pi/2, first half, echo pi, second half, pi/2; odd N puts the extra pulse first."""
    if spec.input_state != InputState.SUPERPOSITION:
        raise ValueError("ramsey_wrap requires a superposition input")
    half = math.ceil(spec.pulse_count / 2)
    return (
        IdealRotation(np.pi / 2, np.pi, channel),
        PulseTrain(0, half),
        IdealRotation(np.pi, np.pi / 2, channel),
        PulseTrain(half, spec.pulse_count),
        IdealRotation(np.pi / 2, np.pi, channel),
    )


def build_protocol(spec: SequenceSpec, ramsey_channel: Channel = Channel.PI) -> tuple[ProtocolStep, ...]:
    if spec.input_state == InputState.SUPERPOSITION:
        return ramsey_wrap(spec, ramsey_channel)
    return eigenstate_protocol(spec)


def ideal_rotation(rotation: IdealRotation) -> np.ndarray:
    """4x4 rotation on the (|0>, channel level) pair."""
    c = rotation.channel.level
    half = rotation.angle_rad / 2
    u = np.eye(LEVEL_COUNT, dtype=complex)
    u[LEVEL_0, LEVEL_0] = u[c, c] = np.cos(half)
    u[LEVEL_0, c] = -1j * np.sin(half) * np.exp(-1j * rotation.phase_rad)
    u[c, LEVEL_0] = -1j * np.sin(half) * np.exp(1j * rotation.phase_rad)
    return u


@dataclass(frozen=True, eq=False)
class SequenceKernel:
    """Per-ion step operators of one carrier/duration, indexed by phase.

    step_ops has shape (ion, phase, 4, 4) and holds pulse then gap in the
    carrier frame. period_s is one pulse plus one idle gap.
    """

    step_ops: np.ndarray
    detunings_hz: np.ndarray
    period_s: float

    @property
    def ion_count(self) -> int:
        return int(self.step_ops.shape[0])


def build_kernel(
    transitions: TransitionSet,
    rabi: RabiMap,
    carrier_hz: float,
    duration_s: float,
    *,
    coupling: CouplingConfig | None = None,
    injected_phase_rad: float = 0.0,
    phase_channel: Channel = Channel.PI,
) -> SequenceKernel:
    """Precompute the step operators for a 50% duty-cycle sequence.

    J-coupling phases (over pulse and gap) and the injected per-pulse phase
    act as z rotations on phase_channel's level.
    """
    if transitions.ion_count != rabi.ion_count:
        raise ConfigError(f"transition map has {transitions.ion_count} ions but Rabi map has {rabi.ion_count}")
    detunings = channel_detunings(transitions, carrier_hz)
    hamiltonians = np.stack([pulse_hamiltonian(rabi.rabi_hz, detunings, phase) for phase in PHASE_SET], axis=1)
    pulses = propagator(hamiltonians, duration_s)

    period = 2 * duration_s
    z_phase = np.full(transitions.ion_count, injected_phase_rad, dtype=float)
    if coupling is not None:
        z_phase = z_phase + j_coupling_phase(coupling.phase_rates_hz(), period)
    diagonal = frame_phases(detunings, duration_s)
    diagonal[:, phase_channel.level] *= np.exp(-1j * z_phase)
    step_ops = diagonal[:, None, :, None] * pulses
    return SequenceKernel(step_ops=step_ops, detunings_hz=detunings, period_s=period)


def run_pulse_train(
    amplitudes: np.ndarray,
    phase_indices: np.ndarray,
    kernel: SequenceKernel,
    start_time_s: float = 0.0,
) -> np.ndarray:
    """Evolve own-frame amplitudes (trial, ion, 4) through phase_indices (trial, n)."""
    pulse_count = phase_indices.shape[1]
    if pulse_count == 0:
        return amplitudes
    state = frame_phases(kernel.detunings_hz, start_time_s)[None] * amplitudes
    for k in range(pulse_count):
        ops = kernel.step_ops[:, phase_indices[:, k]]
        state = np.einsum("itab,tib->tia", ops, state)
    end_time = start_time_s + pulse_count * kernel.period_s
    return np.conj(frame_phases(kernel.detunings_hz, end_time))[None] * state


def run_protocol(
    amplitudes: np.ndarray,
    phase_indices: np.ndarray,
    kernel: SequenceKernel,
    protocol: Sequence[ProtocolStep],
) -> np.ndarray:
    """Execute protocol steps on a batch; ideal rotations take no time."""
    time_s = 0.0
    for step in protocol:
        if isinstance(step, IdealRotation):
            amplitudes = np.einsum("ab,tib->tia", ideal_rotation(step), amplitudes)
        else:
            amplitudes = run_pulse_train(amplitudes, phase_indices[:, step.start : step.stop], kernel, time_s)
            time_s += step.pulse_count * kernel.period_s
    return amplitudes


def warn_if_far_off_resonant(transitions: TransitionSet, rabi: RabiMap, carrier_hz: float) -> bool:
    nearest = float(np.min(np.abs(channel_detunings(transitions, carrier_hz))))
    threshold = OFF_RESONANCE_FACTOR * float(np.max(rabi.rabi_hz, initial=0.0))
    if nearest > threshold:
        logger.warning(
            "carrier %.6f GHz is %.3f MHz from the nearest transition (> %.0f x Rabi)",
            carrier_hz / 1e9,
            nearest / 1e6,
            OFF_RESONANCE_FACTOR,
        )
        return True
    return False


def simulate_batch(
    transitions: TransitionSet,
    rabi: RabiMap,
    specs: Sequence[SequenceSpec],
    *,
    coupling: CouplingConfig | None = None,
    injected_phase_rad: float = 0.0,
    ramsey_channel: Channel = Channel.PI,
    initial: RegisterState | None = None,
) -> np.ndarray:
    """Final own-frame amplitudes (trial, ion, 4) for specs sharing N, carrier, tau and input state."""
    if not specs:
        return np.zeros((0, transitions.ion_count, LEVEL_COUNT), dtype=complex)
    first = specs[0]
    for spec in specs[1:]:
        if (spec.pulse_count, spec.carrier_hz, spec.pulse_duration_s, spec.input_state) != (
            first.pulse_count,
            first.carrier_hz,
            first.pulse_duration_s,
            first.input_state,
        ):
            raise ValueError("batched sequences must share pulse count, carrier, duration and input state")

    kernel = build_kernel(
        transitions,
        rabi,
        first.carrier_hz,
        first.pulse_duration_s,
        coupling=coupling,
        injected_phase_rad=injected_phase_rad,
        phase_channel=ramsey_channel,
    )
    start = initial or RegisterState.ground(transitions.ion_count)
    if start.ion_count != transitions.ion_count:
        raise ConfigError(f"state has {start.ion_count} ions but transition map has {transitions.ion_count}")
    amplitudes = np.repeat(start.amplitudes[None], len(specs), axis=0)
    phase_indices = np.stack([random_phase_indices(spec) for spec in specs]).reshape(len(specs), first.pulse_count)
    return run_protocol(amplitudes, phase_indices, kernel, build_protocol(first, ramsey_channel))


def run_sequence(
    chain: IonChain,
    transitions: TransitionSet,
    rabi: RabiMap,
    spec: SequenceSpec,
    *,
    coupling: CouplingConfig | None = None,
    injected_phase_rad: float = 0.0,
    ramsey_channel: Channel = Channel.PI,
    initial: RegisterState | None = None,
) -> RegisterState:
    """Register state after one randomized sequence (Ramsey-wrapped for superposition input)."""
    if chain.ion_count != transitions.ion_count:
        raise ConfigError(f"chain has {chain.ion_count} ions but transition map has {transitions.ion_count}")
    warn_if_far_off_resonant(transitions, rabi, spec.carrier_hz)
    amplitudes = simulate_batch(
        transitions,
        rabi,
        [spec],
        coupling=coupling,
        injected_phase_rad=injected_phase_rad,
        ramsey_channel=ramsey_channel,
        initial=initial,
    )
    return RegisterState(amplitudes[0])


def measure(
    state: RegisterState,
    readout: ReadoutModel,
    rng: np.random.Generator,
    *,
    seed: int = 0,
    pulse_count: int = 0,
) -> TrialResult:
    """Sample one fluorescence bit per ion through the readout error channel."""
    p_bright = readout.observed_bright_probability(state.bright_probabilities())
    bits = rng.random(state.ion_count) < p_bright
    return TrialResult(bits=bits, seed=seed, pulse_count=pulse_count)


@dataclass(frozen=True, eq=False)
class ExcitationScan:
    """Bright probability per ion along one scanned axis, shape (point, ion)."""

    axis_name: str
    axis_values: np.ndarray
    excitation: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        points, ions = self.excitation.shape
        return pd.DataFrame(
            {
                self.axis_name: np.repeat(self.axis_values, ions),
                "ion_index": np.tile(np.arange(1, ions + 1), points),
                "excitation_probability": self.excitation.reshape(-1),
            }
        )


def spectrum_scan(
    chain: IonChain,
    transitions: TransitionSet,
    rabi: RabiMap,
    pulse_duration_s: float,
    frequency_grid: Sequence[float] | np.ndarray,
) -> ExcitationScan:
    """Single pulse from |0...0> at each carrier frequency."""
    grid = np.asarray(frequency_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency_grid must not be empty")
    if chain.ion_count != transitions.ion_count:
        raise ConfigError(f"chain has {chain.ion_count} ions but transition map has {transitions.ion_count}")
    detunings = grid[:, None, None] - transitions.channel_frequencies()[None]
    unitaries = propagator(pulse_hamiltonian(rabi.rabi_hz[None], detunings, 0.0), pulse_duration_s)
    excitation = 1.0 - np.abs(unitaries[..., LEVEL_0, LEVEL_0]) ** 2
    return ExcitationScan("frequency_hz", grid, np.clip(excitation, 0.0, 1.0))


def rabi_scan(
    transitions: TransitionSet,
    rabi: RabiMap,
    carrier_hz: float,
    durations_s: Sequence[float] | np.ndarray,
) -> ExcitationScan:
    """Excitation of every ion versus pulse length at a fixed carrier."""
    durations = np.asarray(durations_s, dtype=float)
    if durations.size == 0:
        raise ValueError("durations_s must not be empty")
    if np.any(durations < 0):
        raise ValueError("durations must be >= 0")
    hamiltonian = pulse_hamiltonian(rabi.rabi_hz, channel_detunings(transitions, carrier_hz), 0.0)
    eigenvalues, vectors = np.linalg.eigh(hamiltonian)
    phases = np.exp(-1j * eigenvalues[None] * durations[:, None, None])
    # <0|U(t)|0> = sum_k |V_0k|^2 exp(-i lambda_k t)
    overlap = np.einsum("ik,dik->di", np.abs(vectors[:, LEVEL_0, :]) ** 2, phases)
    return ExcitationScan("duration_s", durations, np.clip(1.0 - np.abs(overlap) ** 2, 0.0, 1.0))
