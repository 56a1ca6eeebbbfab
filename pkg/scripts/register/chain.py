"""Equilibrium positions of a linear ion chain and its transition-frequency map."""
from __future__ import annotations

import logging

import numpy as np
import pandas as pd
from scipy.optimize import root

from ..errors import SolverError
from .types import FieldConfig, IonChain, PhysicalConstants, TransitionSet, TrapConfig

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-12

CHAIN_TABLE_COLUMNS = ("ion_index", "position_m", "pi_hz", "sigma_plus_hz", "sigma_minus_hz")


def length_scale(trap: TrapConfig, constants: PhysicalConstants) -> float:
    """Characteristic length l = (e^2 / (4 pi eps0 M w^2))^(1/3)."""
    omega = 2 * np.pi * trap.secular_frequency_hz
    return float(np.cbrt(constants.coulomb_constant_times_e2 / (trap.ion_mass_kg * omega**2)))


def _forces(u: np.ndarray) -> np.ndarray:
    # harmonic restoring force plus pairwise Coulomb repulsion, in units of l
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def _force_jacobian(u: np.ndarray) -> np.ndarray:
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    coupling = 2.0 / d**3
    jac = -coupling
    np.fill_diagonal(jac, 1.0 + coupling.sum(axis=1))
    return jac


def _initial_guess(ion_count: int) -> np.ndarray:
    spacing = 2.0 * ion_count**-0.56
    return (np.arange(ion_count) - (ion_count - 1) / 2) * spacing


def equilibrium_positions(trap: TrapConfig, constants: PhysicalConstants | None = None) -> IonChain:
    """Solve the dimensionless force balance and return positions in metres."""
    constants = constants or PhysicalConstants()
    scale = length_scale(trap, constants)
    if trap.ion_count == 1:
        return IonChain(np.zeros(1), scale)

    solution = root(
        _forces,
        _initial_guess(trap.ion_count),
        jac=_force_jacobian,
        method="hybr",
        options={"xtol": 1e-15, "maxfev": 200 * (trap.ion_count + 1)},
    )
    u = np.sort(solution.x)
    for _ in range(3):
        # Newton polish to reach the residual floor
        u = u - np.linalg.solve(_force_jacobian(u), _forces(u))
    residual = float(np.max(np.abs(_forces(u))))
    logger.debug("equilibrium solve: ions=%d nfev=%s residual=%.2e", trap.ion_count, solution.nfev, residual)
    if not residual < RESIDUAL_TOLERANCE:
        raise SolverError(
            f"equilibrium solve did not converge for {trap.ion_count} ions: {solution.message}",
            iterations=int(solution.nfev),
            residual=residual,
        )
    return IonChain(u * scale, scale)


def transition_map(chain: IonChain, field: FieldConfig, constants: PhysicalConstants | None = None) -> TransitionSet:
    """First-order Zeeman map: sigma transitions shift by +-k*B(z), pi is field free."""
    constants = constants or PhysicalConstants()
    shift = constants.zeeman_coefficient_hz_per_t * field.field_at(chain.positions_m)
    pi = np.full(chain.ion_count, constants.hyperfine_splitting_hz)
    return TransitionSet(pi_hz=pi, sigma_plus_hz=pi + shift, sigma_minus_hz=pi - shift)


def next_neighbor_detunings(transitions: TransitionSet) -> np.ndarray:
    """sigma+ frequency differences between adjacent ions."""
    return np.diff(transitions.sigma_plus_hz)


def chain_table(chain: IonChain, transitions: TransitionSet) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "ion_index": np.arange(1, chain.ion_count + 1),
            "position_m": chain.positions_m,
            "pi_hz": transitions.pi_hz,
            "sigma_plus_hz": transitions.sigma_plus_hz,
            "sigma_minus_hz": transitions.sigma_minus_hz,
        },
        columns=list(CHAIN_TABLE_COLUMNS),
    )
