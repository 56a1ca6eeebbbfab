"""Three-way check of the decay law: closed form, random walk and full unitary Monte Carlo."""
from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd

from ..benchmark.protocol import derive_seed
from ..benchmark.runner import BenchmarkPlan, exact_fidelity
from ..register.types import (
    Channel,
    CouplingConfig,
    FieldConfig,
    IonChain,
    PhysicalConstants,
    RabiMap,
    Register,
    TransitionSet,
    TrapConfig,
)
from .diffusion import mean_fidelity, random_walk_oracle
from .fidelity import predict_fidelity

logger = logging.getLogger(__name__)

ORACLE_COLUMNS = (
    "c",
    "n_pulses",
    "analytic_fidelity",
    "diffusion_fidelity",
    "random_walk_fidelity",
    "random_walk_stderr",
    "unitary_fidelity",
    "unitary_stderr",
)
GENERALIZED_RABI_HZ = 2e6
ZEEMAN_SHIFT_HZ = 12e6
# odd number of half cycles at the generalized Rabi frequency: sin^2 factor is 1
HALF_CYCLES = 49


def spectator_register(c_per_pulse: float) -> tuple[Register, float, float]:
    """Single sigma+-only ion whose detuned pulse has leakage exactly c_per_pulse.

    Returns the register, the carrier offset from its qubit transition and
    the pulse duration.
    """
    if not 0 <= c_per_pulse < 1:
        raise ValueError("c_per_pulse must lie in [0, 1)")
    constants = PhysicalConstants()
    trap = TrapConfig.for_species("171Yb+", 124e3, 1)
    pi_hz = constants.hyperfine_splitting_hz
    transitions = TransitionSet(
        pi_hz=np.array([pi_hz]),
        sigma_plus_hz=np.array([pi_hz + ZEEMAN_SHIFT_HZ]),
        sigma_minus_hz=np.array([pi_hz - ZEEMAN_SHIFT_HZ]),
    )
    rabi = RabiMap.from_weights(
        GENERALIZED_RABI_HZ * np.sqrt(c_per_pulse), 1, pi_weight=0.0, sigma_minus_weight=0.0
    )
    register = Register(
        constants=constants,
        trap=trap,
        field=FieldConfig(0.0, ZEEMAN_SHIFT_HZ / constants.zeeman_coefficient_hz_per_t),
        chain=IonChain(np.zeros(1), 1.0),
        transitions=transitions,
        rabi=rabi,
        coupling=CouplingConfig(np.zeros((1, 1))),
    )
    offset = GENERALIZED_RABI_HZ * np.sqrt(1.0 - c_per_pulse)
    duration = HALF_CYCLES / (2 * GENERALIZED_RABI_HZ)
    return register, float(offset), float(duration)


def oracle_comparison(
    crosstalk_values: Sequence[float],
    n_pulses: int,
    *,
    walkers: int,
    trials: int,
    seed: int,
    threads: int = 1,
) -> pd.DataFrame:
    rows = []
    for index, c in enumerate(crosstalk_values):
        register, offset, duration = spectator_register(c)
        plan = BenchmarkPlan(
            addressed_ions=(0,),
            n_values=(n_pulses,),
            trials=trials,
            seed=seed,
            pulse_duration_s=duration,
            qubit=Channel.SIGMA_PLUS,
            carrier_offset_hz=offset,
            threads=threads,
        )
        unitary, unitary_stderr = exact_fidelity(register, plan, 0, n_pulses)
        walk = random_walk_oracle(c, n_pulses, walkers, derive_seed(seed, index))
        logger.info("oracle C=%.3g: walk=%.5f unitary=%.5f", c, walk.mean, unitary[0])
        rows.append(
            {
                "c": float(c),
                "n_pulses": n_pulses,
                "analytic_fidelity": float(predict_fidelity(c, n_pulses)),
                "diffusion_fidelity": mean_fidelity(2 * c * n_pulses),
                "random_walk_fidelity": walk.mean,
                "random_walk_stderr": walk.stderr,
                "unitary_fidelity": float(unitary[0]),
                "unitary_stderr": float(unitary_stderr[0]),
            }
        )
    return pd.DataFrame(rows, columns=list(ORACLE_COLUMNS))
