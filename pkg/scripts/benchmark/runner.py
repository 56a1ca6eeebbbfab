"""Monte Carlo benchmark runs over addressed ions, sequence lengths and trials."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..register.types import LEVEL_0, Channel, Register, RegisterState
from .protocol import PURPOSE_READOUT, derive_seed, measure, simulate_batch, stream, warn_if_far_off_resonant
from .types import InputState, ReadoutModel, SequenceSpec

logger = logging.getLogger(__name__)

COUNT_COLUMNS = (
    "addressed_ion",
    "pulse_duration_s",
    "N",
    "ion_index",
    "trials",
    "bright_count",
    "fidelity_mean",
    "fidelity_stderr",
)


@dataclass(frozen=True)
class BenchmarkPlan:
    """What to run. Ion indices are 0-based."""

    addressed_ions: tuple[int, ...]
    n_values: tuple[int, ...]
    trials: int
    seed: int
    pulse_duration_s: float
    input_state: InputState = InputState.EIGENSTATE
    qubit: Channel = Channel.SIGMA_PLUS
    carrier_offset_hz: float = 0.0
    injected_phase_rad: float = 0.0
    chunk_size: int = 256
    threads: int = 1
    durations_s: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.addressed_ions:
            raise ValueError("addressed_ions must not be empty")
        if not self.n_values or any(n < 0 for n in self.n_values):
            raise ValueError("n_values must be non-empty and >= 0")
        if len(set(self.n_values)) != len(self.n_values):
            raise ValueError("n_values must be unique")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.chunk_size < 1 or self.threads < 1:
            raise ValueError("chunk_size and threads must be >= 1")
        if not self.pulse_duration_s > 0 or any(d <= 0 for d in self.durations_s):
            raise ValueError("pulse durations must be positive")
        object.__setattr__(self, "input_state", InputState(self.input_state))

    def carrier_hz(self, register: Register, addressed_ion: int) -> float:
        return register.transitions.frequency(addressed_ion, self.qubit) + self.carrier_offset_hz

    def sweep_durations(self) -> tuple[float, ...]:
        return self.durations_s or (self.pulse_duration_s,)


def _trial_specs(
    plan: BenchmarkPlan, carrier_hz: float, addressed_ion: int, n: int, duration_s: float, trials: range
) -> list[SequenceSpec]:
    return [
        SequenceSpec(
            addressed_ion=addressed_ion,
            pulse_count=n,
            pulse_duration_s=duration_s,
            carrier_hz=carrier_hz,
            seed=derive_seed(plan.seed, addressed_ion, n, trial),
            input_state=plan.input_state,
        )
        for trial in trials
    ]


def _chunks(total: int, size: int) -> list[range]:
    return [range(start, min(start + size, total)) for start in range(0, total, size)]


def simulate_final_states(
    register: Register,
    plan: BenchmarkPlan,
    addressed_ion: int,
    n: int,
    duration_s: float | None = None,
) -> tuple[np.ndarray, list[SequenceSpec]]:
    """Own-frame amplitudes (trial, ion, 4) after each trial's sequence.

    Trials run in fixed-size chunks so the result does not depend on the
    number of worker threads.
    """
    duration_s = duration_s or plan.pulse_duration_s
    carrier = plan.carrier_hz(register, addressed_ion)

    def run_chunk(trials: range) -> tuple[np.ndarray, list[SequenceSpec]]:
        specs = _trial_specs(plan, carrier, addressed_ion, n, duration_s, trials)
        amplitudes = simulate_batch(
            register.transitions,
            register.rabi,
            specs,
            coupling=register.coupling,
            injected_phase_rad=plan.injected_phase_rad,
            ramsey_channel=plan.qubit,
        )
        return amplitudes, specs

    chunks = _chunks(plan.trials, plan.chunk_size)
    if plan.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(chunk) for chunk in chunks]
    amplitudes = np.concatenate([r[0] for r in results], axis=0)
    specs = [spec for r in results for spec in r[1]]
    return amplitudes, specs


def fidelity_from_bright(bright_fraction: np.ndarray, input_state: InputState) -> np.ndarray:
    if input_state == InputState.SUPERPOSITION:
        return bright_fraction
    return 1.0 - bright_fraction


def run_benchmark(register: Register, plan: BenchmarkPlan, readout: ReadoutModel | None = None) -> pd.DataFrame:
    """Sampled counts per (addressed ion, duration, N, ion), one row each."""
    readout = readout or ReadoutModel()
    rows: list[dict[str, object]] = []
    for addressed in plan.addressed_ions:
        if not 0 <= addressed < register.ion_count:
            raise ValueError(f"addressed ion {addressed + 1} outside register of {register.ion_count}")
        warn_if_far_off_resonant(register.transitions, register.rabi, plan.carrier_hz(register, addressed))
        for duration in plan.sweep_durations():
            for n in sorted(plan.n_values):
                logger.info(
                    "benchmark: addressed=%d tau=%.4g us N=%d trials=%d",
                    addressed + 1,
                    duration * 1e6,
                    n,
                    plan.trials,
                )
                amplitudes, specs = simulate_final_states(register, plan, addressed, n, duration)
                bits = np.stack(
                    [
                        measure(
                            RegisterState(state),
                            readout,
                            stream(spec.seed, PURPOSE_READOUT),
                            seed=spec.seed,
                            pulse_count=n,
                        ).bits
                        for state, spec in zip(amplitudes, specs)
                    ]
                )
                bright = bits.sum(axis=0)
                fidelity = fidelity_from_bright(bright / plan.trials, plan.input_state)
                stderr = np.sqrt(fidelity * (1.0 - fidelity) / plan.trials)
                for ion in range(register.ion_count):
                    rows.append(
                        {
                            "addressed_ion": addressed + 1,
                            "pulse_duration_s": duration,
                            "N": n,
                            "ion_index": ion + 1,
                            "trials": plan.trials,
                            "bright_count": int(bright[ion]),
                            "fidelity_mean": float(fidelity[ion]),
                            "fidelity_stderr": float(stderr[ion]),
                        }
                    )
    return pd.DataFrame(rows, columns=list(COUNT_COLUMNS))


def exact_fidelity(
    register: Register,
    plan: BenchmarkPlan,
    addressed_ion: int,
    n: int,
    duration_s: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Trial-averaged fidelity per ion from exact populations, with its standard error."""
    amplitudes, _ = simulate_final_states(register, plan, addressed_ion, n, duration_s)
    bright = np.clip(1.0 - np.abs(amplitudes[..., LEVEL_0]) ** 2, 0.0, 1.0)
    fidelity = fidelity_from_bright(bright, plan.input_state)
    if plan.trials < 2:
        return fidelity.mean(axis=0), np.zeros(register.ion_count)
    return fidelity.mean(axis=0), fidelity.std(axis=0, ddof=1) / np.sqrt(plan.trials)
