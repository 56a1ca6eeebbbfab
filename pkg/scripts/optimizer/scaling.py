"""Scaling of spectator error sources with Rabi frequency, field gradient and secular frequency."""
from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import pandas as pd

from ..register.pulses import (
    dephasing_error,
    generalized_rabi,
    j_coupling_phase,
    light_shift_phase,
    sideband_crosstalk,
)
from ..register.types import SidebandConfig

BUDGET_COLUMNS = (
    "source",
    "value",
    "rabi_exponent",
    "gradient_exponent",
    "secular_exponent",
    "scaled_value",
)


class ErrorSource(StrEnum):
    NON_RESONANT = "non_resonant_excitation"
    LIGHT_SHIFT = "light_shift"
    J_COUPLING = "j_coupling"
    SIDEBAND = "sideband"


@dataclass(frozen=True)
class ScalingLaw:
    """Power-law exponents for (Rabi frequency, gradient, secular frequency)."""

    rabi_exponent: float
    gradient_exponent: float
    secular_exponent: float

    def factor(self, ratios: tuple[float, float, float]) -> float:
        rabi, gradient, secular = ratios
        if min(ratios) <= 0:
            raise ValueError("scaling ratios must be positive")
        return rabi**self.rabi_exponent * gradient**self.gradient_exponent * secular**self.secular_exponent


# Detuning grows with b and with the ion spacing, which shrinks as nu^(-2/3).
CROSSTALK_LAW = ScalingLaw(2.0, -2.0, 4.0 / 3.0)
LIGHT_SHIFT_LAW = ScalingLaw(2.0, -2.0, 4.0 / 3.0)
# J ~ b^2 / nu^2 and the pulse length ~ 1/Omega.
J_COUPLING_LAW = ScalingLaw(-2.0, 4.0, -4.0)

LAWS = {
    ErrorSource.NON_RESONANT: CROSSTALK_LAW,
    ErrorSource.LIGHT_SHIFT: LIGHT_SHIFT_LAW,
    ErrorSource.J_COUPLING: J_COUPLING_LAW,
    ErrorSource.SIDEBAND: CROSSTALK_LAW,
}


def scale_error(base_value: float, law: ScalingLaw, factors: tuple[float, float, float]) -> float:
    return float(base_value * law.factor(factors))


def mean_nonresonant_excitation(rabi_hz: float, detuning_hz: float) -> float:
    """sin^2 averaged over pulse lengths: (Omega / Omega_R)^2 / 2."""
    return float(0.5 * (rabi_hz / generalized_rabi(rabi_hz, detuning_hz)) ** 2)


def error_budget(
    rabi_hz: float,
    detuning_hz: float,
    duration_s: float,
    j_hz: float,
    *,
    ratios: tuple[float, float, float] = (1.0, 1.0, 1.0),
    sideband: SidebandConfig | None = None,
) -> pd.DataFrame:
    """Per-source spectator error at the given drive and its value after rescaling by ratios.

    The non-resonant row uses the duration-averaged excitation, since the bare
    sin^2 factor sits at an arbitrary phase for any single pulse length.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    values = {
        ErrorSource.NON_RESONANT: mean_nonresonant_excitation(rabi_hz, detuning_hz),
        ErrorSource.LIGHT_SHIFT: float(dephasing_error(light_shift_phase(rabi_hz, detuning_hz, duration_s))),
        ErrorSource.J_COUPLING: float(dephasing_error(j_coupling_phase(j_hz, duration_s))),
    }
    if sideband is not None and sideband.effective_lamb_dicke > 0:
        values[ErrorSource.SIDEBAND] = sideband_crosstalk(sideband, rabi_hz, detuning_hz, duration_s)
    rows = []
    for source, value in values.items():
        law = LAWS[source]
        rows.append(
            {
                "source": source.value,
                "value": value,
                "rabi_exponent": law.rabi_exponent,
                "gradient_exponent": law.gradient_exponent,
                "secular_exponent": law.secular_exponent,
                "scaled_value": scale_error(value, law, ratios),
            }
        )
    return pd.DataFrame(rows, columns=list(BUDGET_COLUMNS))


def total_error(budget: pd.DataFrame, column: str = "value") -> float:
    return float(np.sum(budget[column]))
