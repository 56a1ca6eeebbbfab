"""Cross-talk matrices from benchmark fits and from single-pulse dynamics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from ..benchmark.runner import BenchmarkPlan, run_benchmark
from ..benchmark.types import InputState, ReadoutModel
from ..errors import FitError
from ..register.pulses import channel_detunings, propagator, pulse_hamiltonian, sideband_crosstalk
from ..register.types import LEVEL_0, Channel, Register
from .fidelity import fidelity_from_counts, fit_decay

logger = logging.getLogger(__name__)

TABLE_SCALE = 1e-5


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    """C[i, j]: per-pulse error on spectator j when ion i is addressed.

    Diagonal entries and failed fits are NaN. Indices are 0-based.
    """

    values: np.ndarray
    sigmas: np.ndarray
    failures: dict[tuple[int, int], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        sigmas = np.array(self.sigmas, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or sigmas.shape != values.shape:
            raise ValueError("values and sigmas must be square arrays of one shape")
        if np.any(values[np.isfinite(values)] < 0):
            raise ValueError("cross-talk entries must be >= 0")
        np.fill_diagonal(values, np.nan)
        np.fill_diagonal(sigmas, np.nan)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def ion_count(self) -> int:
        return int(self.values.shape[0])

    def neighbor_mask(self) -> np.ndarray:
        idx = np.arange(self.ion_count)
        return np.abs(idx[:, None] - idx[None, :]) == 1

    def non_neighbor_mask(self) -> np.ndarray:
        idx = np.arange(self.ion_count)
        return np.abs(idx[:, None] - idx[None, :]) > 1

    def row_mean(self, row: int, mask: np.ndarray) -> float:
        return float(np.nanmean(np.where(mask[row], self.values[row], np.nan)))

    def to_records(self) -> list[dict[str, object]]:
        records = []
        for i in range(self.ion_count):
            for j in range(self.ion_count):
                if i == j:
                    continue
                value, sigma = self.values[i, j], self.sigmas[i, j]
                records.append(
                    {
                        "addressed": i + 1,
                        "spectator": j + 1,
                        "c": float(value) if np.isfinite(value) else None,
                        "c_sigma": float(sigma) if np.isfinite(sigma) else None,
                    }
                )
        return records

    def to_table_frame(self, scale: float = TABLE_SCALE) -> pd.DataFrame:
        """Addressed ions as rows, spectators as columns, entries 'value(sigma)' in units of scale."""
        exponent = f"{scale:.0e}".replace("e-0", "e-")
        rows = []
        for i in range(self.ion_count):
            row: dict[str, object] = {"addressed_ion": i + 1}
            for j in range(self.ion_count):
                value, sigma = self.values[i, j], self.sigmas[i, j]
                if i == j or not np.isfinite(value):
                    cell = ""
                elif np.isfinite(sigma):
                    cell = f"{value / scale:.1f}({sigma / scale:.1f})"
                else:
                    cell = f"{value / scale:.1f}"
                row[f"spectator_{j + 1} (x{exponent})"] = cell
            rows.append(row)
        return pd.DataFrame(rows)


def matrix_from_counts(counts: pd.DataFrame, ion_count: int, input_state: InputState | str) -> CrosstalkMatrix:
    """Fit every spectator curve of a count table; fit failures leave NaN entries.

    Rows sharing (addressed ion, spectator, N) are pooled, so a pulse-length
    sweep yields one curve averaged over the swept durations.
    """
    values = np.full((ion_count, ion_count), np.nan)
    sigmas = np.full((ion_count, ion_count), np.nan)
    failures: dict[tuple[int, int], str] = {}
    for (addressed, ion), group in counts.groupby(["addressed_ion", "ion_index"], sort=True):
        i, j = int(addressed) - 1, int(ion) - 1
        if i == j:
            continue
        pooled = group.groupby("N", as_index=False, sort=True)[["trials", "bright_count"]].sum()
        curve = fidelity_from_counts(pooled, input_state, ion_index=j, addressed_index=i)
        try:
            result = fit_decay(curve)
        except FitError as exc:
            logger.warning("cross-talk fit failed for C(%d,%d): %s", i + 1, j + 1, exc)
            failures[(i, j)] = str(exc)
            continue
        values[i, j] = result.crosstalk
        sigmas[i, j] = result.crosstalk_sigma
    return CrosstalkMatrix(values, sigmas, failures)


def crosstalk_matrix(
    register: Register,
    plan: BenchmarkPlan,
    readout: ReadoutModel | None = None,
) -> tuple[CrosstalkMatrix, pd.DataFrame]:
    """Benchmark every addressed ion of the plan and fit all spectators.

    A duration sweep in the plan is pooled per N, which stands in for slow
    pulse-length drift. Returns the matrix and the underlying count table.
    """
    frames = []
    for addressed in plan.addressed_ions:
        logger.info("cross-talk row %d of %d", addressed + 1, register.ion_count)
        frames.append(run_benchmark(register, replace(plan, addressed_ions=(addressed,)), readout))
    counts = pd.concat(frames, ignore_index=True)
    return matrix_from_counts(counts, register.ion_count, plan.input_state), counts


def single_pulse_leakage(register: Register, carrier_hz: float, duration_s: float) -> np.ndarray:
    """Probability of leaving |0> after one pulse from |0>, per ion."""
    detunings = channel_detunings(register.transitions, carrier_hz)
    unitaries = propagator(pulse_hamiltonian(register.rabi.rabi_hz, detunings, 0.0), duration_s)
    return np.clip(1.0 - np.abs(unitaries[:, LEVEL_0, LEVEL_0]) ** 2, 0.0, 1.0)


def expected_crosstalk_matrix(
    register: Register,
    duration_s: float,
    *,
    qubit: Channel = Channel.SIGMA_PLUS,
    carrier_offset_hz: float = 0.0,
    window_s: float = 0.0,
    window_points: int = 101,
) -> CrosstalkMatrix:
    """Per-pulse leakage of every spectator from the exact 4-level single-pulse dynamics.

    With window_s > 0 the leakage is averaged over pulse lengths uniformly
    spread across [duration - window/2, duration + window/2], which smooths
    the fast sin^2 modulation the way slow drifts do in long runs. The
    thermal sideband term is added when the register has a non-zero
    Lamb-Dicke factor.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    if window_s < 0 or window_s >= 2 * duration_s:
        raise ValueError("window_s must lie in [0, 2 * duration_s)")
    durations = (
        np.linspace(duration_s - window_s / 2, duration_s + window_s / 2, window_points) if window_s else [duration_s]
    )
    n = register.ion_count
    values = np.zeros((n, n))
    for i in range(n):
        carrier = register.transitions.frequency(i, qubit) + carrier_offset_hz
        values[i] = np.mean([single_pulse_leakage(register, carrier, tau) for tau in durations], axis=0)
        if register.sideband.effective_lamb_dicke > 0:
            detunings = channel_detunings(register.transitions, carrier)[:, qubit]
            for j in range(n):
                values[i, j] += np.mean(
                    [
                        sideband_crosstalk(register.sideband, register.rabi.rabi_hz[j, qubit], detunings[j], tau)
                        for tau in durations
                    ]
                )
    return CrosstalkMatrix(values, np.zeros((n, n)))
