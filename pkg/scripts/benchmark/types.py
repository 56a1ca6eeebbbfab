"""Data types for benchmark sequences and readout."""
from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from ..register.types import Channel


class InputState(StrEnum):
    EIGENSTATE = "eigenstate"
    SUPERPOSITION = "superposition"


@dataclass(frozen=True)
class SequenceSpec:
    """One randomized pulse sequence.

    addressed_ion is 0-based. carrier_hz is normally resonant with the
    addressed ion's qubit transition.
    """

    addressed_ion: int
    pulse_count: int
    pulse_duration_s: float
    carrier_hz: float
    seed: int
    input_state: InputState = InputState.EIGENSTATE

    def __post_init__(self) -> None:
        if self.pulse_count < 0:
            raise ValueError("pulse_count must be >= 0")
        if not self.pulse_duration_s > 0:
            raise ValueError("pulse_duration_s must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        object.__setattr__(self, "input_state", InputState(self.input_state))


def _as_fidelities(value: float | tuple[float, ...], name: str) -> np.ndarray:
    array = np.atleast_1d(np.asarray(value, dtype=float))
    if np.any(array <= 0.5) or np.any(array > 1.0):
        raise ValueError(f"{name} must lie in (0.5, 1]")
    return array


@dataclass(frozen=True)
class ReadoutModel:
    """Classical bit-flip channel lumping preparation and detection errors.

    p_prep is the probability that a dark ion reads dark; p_prep_bright, when
    given, is the probability that a bright ion reads bright. Either may be a
    scalar or one value per ion.
    """

    p_prep: float | tuple[float, ...] = 1.0
    p_prep_bright: float | tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        _as_fidelities(self.p_prep, "p_prep")
        if self.p_prep_bright is not None:
            _as_fidelities(self.p_prep_bright, "p_prep_bright")

    def observed_bright_probability(self, p_bright: np.ndarray) -> np.ndarray:
        """Probability of a bright reading given the ideal bright probability per ion."""
        p_bright = np.asarray(p_bright, dtype=float)
        dark_ok = _as_fidelities(self.p_prep, "p_prep")
        bright_ok = dark_ok if self.p_prep_bright is None else _as_fidelities(self.p_prep_bright, "p_prep_bright")
        return p_bright * bright_ok + (1.0 - p_bright) * (1.0 - dark_ok)


@dataclass(frozen=True, eq=False)
class TrialResult:
    bits: np.ndarray  # one bool per ion, True = bright
    seed: int
    pulse_count: int


@dataclass(frozen=True)
class IdealRotation:
    """Instantaneous resonant rotation applied to every ion in its own frame."""

    angle_rad: float
    phase_rad: float
    channel: Channel = Channel.PI


@dataclass(frozen=True)
class PulseTrain:
    """Slice [start, stop) of the randomized pulse sequence."""

    start: int
    stop: int

    @property
    def pulse_count(self) -> int:
        return self.stop - self.start


ProtocolStep = IdealRotation | PulseTrain
