"""Data types for the ion register model.

All frequencies are ordinary frequencies in Hz. Factors of 2π are applied
inside the dynamics functions only.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

AMU_KG = 1.66053906660e-27
ION_MASSES_AMU = {"171Yb+": 170.936323}

# Basis order of the single-ion amplitude vector.
LEVEL_0 = 0
LEVEL_0_PRIME = 1
LEVEL_PLUS_1 = 2
LEVEL_MINUS_1 = 3
LEVEL_COUNT = 4


class Channel(IntEnum):
    """Microwave transitions out of |0>; value indexes the channel axis."""

    PI = 0
    SIGMA_PLUS = 1
    SIGMA_MINUS = 2

    @property
    def level(self) -> int:
        return int(self) + 1

    @classmethod
    def from_name(cls, name: str) -> Channel:
        try:
            return cls[name.strip().upper()]
        except KeyError:
            names = ", ".join(c.name.lower() for c in cls)
            raise ValueError(f"unknown channel {name!r}; expected one of {names}") from None


@dataclass(frozen=True)
class PhysicalConstants:
    zeeman_coefficient_hz_per_t: float = 1.3996e10
    coulomb_constant_times_e2: float = 2.307077552e-28  # N m^2
    hyperfine_splitting_hz: float = 12.642812e9

    def __post_init__(self) -> None:
        for name in ("zeeman_coefficient_hz_per_t", "coulomb_constant_times_e2", "hyperfine_splitting_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TrapConfig:
    secular_frequency_hz: float
    ion_mass_kg: float
    ion_count: int

    def __post_init__(self) -> None:
        if not self.secular_frequency_hz > 0:
            raise ValueError("secular_frequency_hz must be positive")
        if not self.ion_mass_kg > 0:
            raise ValueError("ion_mass_kg must be positive")
        if self.ion_count < 1:
            raise ValueError("ion_count must be >= 1")

    @classmethod
    def for_species(cls, species: str, secular_frequency_hz: float, ion_count: int) -> TrapConfig:
        try:
            mass_amu = ION_MASSES_AMU[species]
        except KeyError:
            raise ValueError(f"unknown ion species {species!r}") from None
        return cls(secular_frequency_hz, mass_amu * AMU_KG, ion_count)


@dataclass(frozen=True)
class FieldConfig:
    gradient_t_per_m: float
    bias_t: float
    zero_position_m: float = 0.0

    def __post_init__(self) -> None:
        if self.gradient_t_per_m < 0:
            raise ValueError("gradient_t_per_m must be >= 0")

    def field_at(self, positions_m: np.ndarray) -> np.ndarray:
        return self.bias_t + self.gradient_t_per_m * (np.asarray(positions_m, dtype=float) - self.zero_position_m)


@dataclass(frozen=True, eq=False)
class IonChain:
    positions_m: np.ndarray
    length_scale_m: float

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions_m, dtype=float)
        if positions.ndim != 1 or positions.size == 0:
            raise ValueError("positions_m must be a non-empty 1-d array")
        if np.any(np.diff(positions) <= 0):
            raise ValueError("positions_m must be strictly ascending")
        object.__setattr__(self, "positions_m", positions)

    @property
    def ion_count(self) -> int:
        return int(self.positions_m.size)

    @property
    def spacings_m(self) -> np.ndarray:
        return np.diff(self.positions_m)


@dataclass(frozen=True, eq=False)
class TransitionSet:
    """Per-ion transition frequencies out of |0>."""

    pi_hz: np.ndarray
    sigma_plus_hz: np.ndarray
    sigma_minus_hz: np.ndarray

    def __post_init__(self) -> None:
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.pi_hz, self.sigma_plus_hz, self.sigma_minus_hz)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("transition arrays must share one 1-d shape")
        for name, value in zip(("pi_hz", "sigma_plus_hz", "sigma_minus_hz"), arrays):
            object.__setattr__(self, name, value)

    @property
    def ion_count(self) -> int:
        return int(self.pi_hz.size)

    def channel_frequencies(self) -> np.ndarray:
        """(ion, channel) frequency table in Channel order."""
        return np.stack([self.pi_hz, self.sigma_plus_hz, self.sigma_minus_hz], axis=1)

    def frequency(self, ion_index: int, channel: Channel) -> float:
        return float(self.channel_frequencies()[ion_index, channel])


@dataclass(frozen=True)
class Pulse:
    carrier_hz: float
    phase_rad: float
    duration_s: float

    def __post_init__(self) -> None:
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        object.__setattr__(self, "phase_rad", float(np.mod(self.phase_rad, 2 * np.pi)))


@dataclass(frozen=True, eq=False)
class RabiMap:
    """Resonant Rabi frequency per (ion, channel), in Hz."""

    rabi_hz: np.ndarray

    def __post_init__(self) -> None:
        rabi = np.asarray(self.rabi_hz, dtype=float)
        if rabi.ndim != 2 or rabi.shape[1] != len(Channel):
            raise ValueError("rabi_hz must have shape (ion_count, 3)")
        if np.any(rabi < 0):
            raise ValueError("Rabi frequencies must be >= 0")
        object.__setattr__(self, "rabi_hz", rabi)

    @property
    def ion_count(self) -> int:
        return int(self.rabi_hz.shape[0])

    @classmethod
    def from_weights(
        cls,
        per_ion_hz: float | list[float] | np.ndarray,
        ion_count: int,
        *,
        pi_weight: float = 1.0,
        sigma_plus_weight: float = 1.0,
        sigma_minus_weight: float = 1.0,
    ) -> RabiMap:
        base = np.broadcast_to(np.asarray(per_ion_hz, dtype=float), (ion_count,))
        weights = np.array([pi_weight, sigma_plus_weight, sigma_minus_weight], dtype=float)
        return cls(base[:, None] * weights[None, :])

    def scaled(self, factor: float) -> RabiMap:
        return RabiMap(self.rabi_hz * factor)


# One ion: four complex amplitudes over (|0>, |0'>, |+1>, |-1>).
IonState = np.ndarray


@dataclass(frozen=True, eq=False)
class RegisterState:
    """Product state of the register, amplitudes shaped (ion, level)."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.ndim != 2 or amplitudes.shape[1] != LEVEL_COUNT:
            raise ValueError("amplitudes must have shape (ion_count, 4)")
        norms = np.sum(np.abs(amplitudes) ** 2, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("every ion state must be normalized")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def ground(cls, ion_count: int) -> RegisterState:
        amplitudes = np.zeros((ion_count, LEVEL_COUNT), dtype=complex)
        amplitudes[:, LEVEL_0] = 1.0
        return cls(amplitudes)

    @property
    def ion_count(self) -> int:
        return int(self.amplitudes.shape[0])

    def ion(self, index: int) -> IonState:
        return self.amplitudes[index].copy()

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def bright_probabilities(self) -> np.ndarray:
        """Probability of fluorescence per ion (any F=1 level)."""
        return np.clip(1.0 - self.populations()[:, LEVEL_0], 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CouplingConfig:
    j_matrix_hz: np.ndarray
    enabled: bool = False

    def __post_init__(self) -> None:
        j = np.asarray(self.j_matrix_hz, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError("j_matrix_hz must be square")
        if not np.allclose(j, j.T):
            raise ValueError("j_matrix_hz must be symmetric")
        if np.any(np.diag(j) != 0):
            raise ValueError("j_matrix_hz must have a zero diagonal")
        object.__setattr__(self, "j_matrix_hz", j)

    @classmethod
    def nearest_neighbor(cls, ion_count: int, j_hz: float, *, enabled: bool = True) -> CouplingConfig:
        j = np.zeros((ion_count, ion_count))
        idx = np.arange(ion_count - 1)
        j[idx, idx + 1] = j_hz
        j[idx + 1, idx] = j_hz
        return cls(j, enabled)

    def phase_rates_hz(self) -> np.ndarray:
        """Per-ion phase accumulation rate; zeros when disabled."""
        if not self.enabled:
            return np.zeros(self.j_matrix_hz.shape[0])
        return self.j_matrix_hz.sum(axis=1)


@dataclass(frozen=True)
class SidebandConfig:
    mode_frequency_hz: float = 124e3
    mean_phonon_number: float = 150.0
    effective_lamb_dicke: float = 0.0

    def __post_init__(self) -> None:
        if self.mean_phonon_number < 0:
            raise ValueError("mean_phonon_number must be >= 0")
        if self.effective_lamb_dicke < 0:
            raise ValueError("effective_lamb_dicke must be >= 0")


@dataclass(frozen=True, eq=False)
class Register:
    """Everything the dynamics need about one configured register."""

    constants: PhysicalConstants
    trap: TrapConfig
    field: FieldConfig
    chain: IonChain
    transitions: TransitionSet
    rabi: RabiMap
    coupling: CouplingConfig
    sideband: SidebandConfig = SidebandConfig()

    @property
    def ion_count(self) -> int:
        return self.chain.ion_count

    def with_rabi(self, rabi: RabiMap) -> Register:
        return replace(self, rabi=rabi)
