"""Rectangular microwave pulses on the 4-level hyperfine manifold.

Conventions:
- detuning = carrier frequency - transition frequency, in Hz
- two-level rotations are exp(-i theta/2 n.sigma) with sigma_z = diag(1, -1)
  on (|0>, |excited>), theta = 2 pi Omega_R tau
- 4-level Hamiltonian in the carrier frame, per channel c:
  H = 2 pi [ -delta_c |c><c| + Omega_c/2 (e^{-i phi} |0><c| + h.c.) ]
- RegisterState amplitudes live in each ion's own interaction frame
"""
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from ..errors import ConfigError
from .types import LEVEL_COUNT, Pulse, RabiMap, RegisterState, SidebandConfig, TransitionSet

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

THERMAL_TAIL_TOLERANCE = 1e-12


def generalized_rabi(rabi: ArrayLike, detuning: ArrayLike) -> np.ndarray | float:
    """sqrt(Omega^2 + Delta^2), Hz."""
    if np.any(np.asarray(rabi) < 0):
        raise ValueError("rabi must be >= 0")
    return np.hypot(rabi, detuning)


def _validate_duration(duration: ArrayLike) -> None:
    if np.any(np.asarray(duration) <= 0):
        raise ValueError("duration must be positive")


def two_level_unitary(rabi: float, detuning: float, phase: float, duration: float) -> np.ndarray:
    """SU(2) rotation of a detuned rectangular pulse on (|0>, |excited>)."""
    _validate_duration(duration)
    omega_r = float(generalized_rabi(rabi, detuning))
    if omega_r == 0.0:
        return np.eye(2, dtype=complex)
    n_perp = rabi / omega_r
    axis = np.array([n_perp * np.cos(phase), n_perp * np.sin(phase), detuning / omega_r])
    half_angle = np.pi * omega_r * duration
    return np.cos(half_angle) * np.eye(2) - 1j * np.sin(half_angle) * np.einsum("k,kij->ij", axis, _PAULI)


def crosstalk_probability(rabi: ArrayLike, detuning: ArrayLike, duration: ArrayLike) -> np.ndarray | float:
    """(Omega/Omega_R)^2 sin^2(pi Omega_R tau); broadcasts over array inputs."""
    _validate_duration(duration)
    rabi = np.asarray(rabi, dtype=float)
    omega_r = generalized_rabi(rabi, detuning)
    ratio = np.divide(rabi, omega_r, out=np.zeros(np.broadcast(rabi, omega_r).shape), where=omega_r > 0)
    return ratio**2 * np.sin(np.pi * omega_r * duration) ** 2


def channel_detunings(transitions: TransitionSet, carrier_hz: float) -> np.ndarray:
    """(ion, channel) detunings of one carrier."""
    return carrier_hz - transitions.channel_frequencies()


def pulse_hamiltonian(rabi_hz: np.ndarray, detunings_hz: np.ndarray, phase: float) -> np.ndarray:
    """Carrier-frame Hamiltonian in rad/s, shape (..., 4, 4)."""
    rabi_hz = np.asarray(rabi_hz, dtype=float)
    detunings_hz = np.asarray(detunings_hz, dtype=float)
    shape = np.broadcast_shapes(rabi_hz.shape, detunings_hz.shape)
    h = np.zeros(shape[:-1] + (LEVEL_COUNT, LEVEL_COUNT), dtype=complex)
    coupling = np.pi * np.broadcast_to(rabi_hz, shape) * np.exp(-1j * phase)
    h[..., 0, 1:] = coupling
    h[..., 1:, 0] = np.conj(coupling)
    idx = np.arange(1, LEVEL_COUNT)
    h[..., idx, idx] = -2 * np.pi * np.broadcast_to(detunings_hz, shape)
    return h


def propagator(hamiltonian: np.ndarray, duration: float) -> np.ndarray:
    """exp(-i H tau) for Hermitian H, batched over leading axes."""
    eigenvalues, vectors = np.linalg.eigh(hamiltonian)
    phases = np.exp(-1j * eigenvalues * duration)
    return np.einsum("...ik,...k,...jk->...ij", vectors, phases, np.conj(vectors))


def frame_phases(detunings_hz: np.ndarray, time_s: float) -> np.ndarray:
    """Diagonal of the own-frame to carrier-frame change at time t, shape (..., 4)."""
    detunings_hz = np.asarray(detunings_hz, dtype=float)
    cycles = np.mod(detunings_hz * time_s, 1.0)
    ones = np.ones(detunings_hz.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([ones, np.exp(2j * np.pi * cycles)], axis=-1)


def pulse_unitaries(pulse: Pulse, transitions: TransitionSet, rabi: RabiMap) -> np.ndarray:
    """Carrier-frame propagator of one pulse for every ion, shape (ion, 4, 4)."""
    if transitions.ion_count != rabi.ion_count:
        raise ConfigError(f"transition map has {transitions.ion_count} ions but Rabi map has {rabi.ion_count}")
    detunings = channel_detunings(transitions, pulse.carrier_hz)
    return propagator(pulse_hamiltonian(rabi.rabi_hz, detunings, pulse.phase_rad), pulse.duration_s)


def apply_pulse(
    state: RegisterState,
    pulse: Pulse,
    transitions: TransitionSet,
    rabi: RabiMap,
    *,
    start_time_s: float = 0.0,
) -> RegisterState:
    if state.ion_count != transitions.ion_count:
        raise ConfigError(f"state has {state.ion_count} ions but transition map has {transitions.ion_count}")
    unitaries = pulse_unitaries(pulse, transitions, rabi)
    detunings = channel_detunings(transitions, pulse.carrier_hz)
    carrier_frame = frame_phases(detunings, start_time_s) * state.amplitudes
    evolved = np.einsum("iab,ib->ia", unitaries, carrier_frame)
    own_frame = np.conj(frame_phases(detunings, start_time_s + pulse.duration_s)) * evolved
    return RegisterState(own_frame)


def light_shift_phase(rabi: ArrayLike, detuning: ArrayLike, duration: ArrayLike) -> np.ndarray | float:
    """Accumulated ac Stark phase 2 pi Omega^2/(2 Delta) tau, radians."""
    if np.any(np.asarray(detuning) == 0):
        raise ValueError("light shift is undefined at zero detuning")
    return 2 * np.pi * np.asarray(rabi, dtype=float) ** 2 / (2 * np.asarray(detuning, dtype=float)) * duration


def dephasing_error(phase_shift: ArrayLike) -> np.ndarray | float:
    """1 - (1 + cos dphi)/2."""
    return np.sin(np.asarray(phase_shift, dtype=float) / 2) ** 2


def j_coupling_phase(j: ArrayLike, duration: ArrayLike) -> np.ndarray | float:
    return 2 * np.pi * np.asarray(j, dtype=float) * duration


def thermal_distribution(mean_phonon_number: float, max_terms: int = 10_000) -> np.ndarray:
    """Geometric occupation probabilities, truncated once the tail drops below tolerance."""
    if mean_phonon_number == 0:
        return np.ones(1)
    q = mean_phonon_number / (mean_phonon_number + 1)
    terms = int(min(max_terms, np.ceil(np.log(THERMAL_TAIL_TOLERANCE) / np.log(q)) + 1))
    n = np.arange(terms)
    return q**n / (mean_phonon_number + 1)


def sideband_crosstalk(
    config: SidebandConfig,
    rabi: float,
    carrier_detuning: float,
    duration: float,
    *,
    max_terms: int = 10_000,
) -> float:
    """Thermally averaged excitation through the red and blue motional sidebands."""
    _validate_duration(duration)
    if config.effective_lamb_dicke == 0 or rabi == 0:
        return 0.0
    weights = thermal_distribution(config.mean_phonon_number, max_terms)
    n = np.arange(weights.size)
    coupling = config.effective_lamb_dicke * rabi
    red = crosstalk_probability(coupling * np.sqrt(n), carrier_detuning - config.mode_frequency_hz, duration)
    blue = crosstalk_probability(coupling * np.sqrt(n + 1), carrier_detuning + config.mode_frequency_hz, duration)
    return float(np.sum(weights * (red + blue)))
