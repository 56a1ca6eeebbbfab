"""Fidelity curves from bright counts and the exponential decay fit.

Decay model: f(N) = 1/2 (1 + (2 p0 - 1) exp(-2 C N)).
"""
from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
import pandas as pd
from scipy.optimize import least_squares

from ..benchmark.types import InputState
from ..errors import FitError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 3
FIT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FidelityPoint:
    n: int
    fidelity_mean: float
    stderr: float
    trials: int
    wilson_sigma: float


@dataclass(frozen=True)
class FidelityCurve:
    points: tuple[FidelityPoint, ...]
    ion_index: int
    addressed_index: int
    input_state: InputState = InputState.EIGENSTATE

    def __post_init__(self) -> None:
        n = [p.n for p in self.points]
        if any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("fidelity curve N values must be strictly increasing")

    @property
    def n_values(self) -> np.ndarray:
        return np.array([p.n for p in self.points], dtype=float)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([p.fidelity_mean for p in self.points])

    @property
    def fit_sigmas(self) -> np.ndarray:
        return np.array([max(p.stderr, p.wilson_sigma) for p in self.points])

    def subset(self, keep: Iterable[int]) -> FidelityCurve:
        wanted = set(keep)
        return FidelityCurve(
            tuple(p for p in self.points if p.n in wanted), self.ion_index, self.addressed_index, self.input_state
        )


def wilson_half_width(successes: float, trials: int, z: float = 1.0) -> float:
    """Half width of the Wilson score interval; non-zero at 0 and at trials."""
    p = successes / trials
    denominator = 1.0 + z**2 / trials
    return float(z * np.sqrt(p * (1.0 - p) / trials + z**2 / (4.0 * trials**2)) / denominator)


def fidelity_from_counts(
    counts: pd.DataFrame | Iterable[tuple[int, int, int]],
    input_state: InputState | str = InputState.EIGENSTATE,
    *,
    ion_index: int = 0,
    addressed_index: int = 0,
) -> FidelityCurve:
    """Build a curve from (N, trials, bright_count) rows.

    Eigenstate input: F = 1 - bright fraction. Superposition input (after the
    Ramsey wrapper): F = bright fraction.
    """
    input_state = InputState(input_state)
    if isinstance(counts, pd.DataFrame):
        rows = list(counts[["N", "trials", "bright_count"]].itertuples(index=False, name=None))
    else:
        rows = list(counts)
    points = []
    for n, trials, bright in sorted(rows):
        if trials <= 0:
            raise ValueError(f"trials must be positive at N={n}")
        if not 0 <= bright <= trials:
            raise ValueError(f"bright_count {bright} outside [0, {trials}] at N={n}")
        bright_fraction = bright / trials
        fidelity = bright_fraction if input_state == InputState.SUPERPOSITION else 1.0 - bright_fraction
        points.append(
            FidelityPoint(
                n=int(n),
                fidelity_mean=float(fidelity),
                stderr=float(np.sqrt(fidelity * (1.0 - fidelity) / trials)),
                trials=int(trials),
                wilson_sigma=wilson_half_width(bright, int(trials)),
            )
        )
    return FidelityCurve(tuple(points), ion_index, addressed_index, input_state)


def predict_fidelity(c: ArrayLike, n: ArrayLike) -> np.ndarray | float:
    """Mean fidelity after n randomized pulses of per-pulse cross-talk c."""
    if np.any(np.asarray(c) < 0):
        raise ValueError("cross-talk must be >= 0")
    return 0.5 * (1.0 + np.exp(-2.0 * np.asarray(c, dtype=float) * np.asarray(n, dtype=float)))


def decay_model(n: ArrayLike, p0: float, c: float) -> np.ndarray | float:
    return 0.5 * (1.0 + (2.0 * p0 - 1.0) * np.exp(-2.0 * c * np.asarray(n, dtype=float)))


@dataclass(frozen=True, eq=False)
class FitResult:
    p0: float
    crosstalk: float
    covariance: np.ndarray
    reduced_chi2: float
    upper_bound: float | None = None
    nfev: int = 0

    @property
    def p0_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def crosstalk_sigma(self) -> float:
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))

    def to_dict(self) -> dict[str, object]:
        return {
            "p0": self.p0,
            "p0_sigma": self.p0_sigma,
            "c": self.crosstalk,
            "c_sigma": self.crosstalk_sigma,
            "c_upper_bound": self.upper_bound,
            "reduced_chi2": self.reduced_chi2,
        }


def _initial_guess(n: np.ndarray, f: np.ndarray) -> np.ndarray:
    p0 = float(np.clip(f[np.argmin(n)], 0.6, 1.0 - 1e-9))
    amplitude = (2.0 * f - 1.0) / (2.0 * p0 - 1.0)
    usable = amplitude > 0.05
    c = 0.0
    if np.count_nonzero(usable) >= 2 and np.ptp(n[usable]) > 0:
        slope = np.polyfit(n[usable], np.log(amplitude[usable]), 1)[0]
        c = -slope / 2.0
    if not c > 0:
        c = 1e-3 / max(float(n.max()), 1.0)
    return np.array([p0, c])


def fit_decay(curve: FidelityCurve) -> FitResult:
    """Weighted bounded least squares of the decay model on (p0, C)."""
    n = curve.n_values
    if np.unique(n).size < MIN_FIT_POINTS:
        raise ValueError(f"fit needs at least {MIN_FIT_POINTS} distinct N values")
    f = curve.fidelities
    sigma = curve.fit_sigmas

    def residuals(params: np.ndarray) -> np.ndarray:
        return (decay_model(n, params[0], params[1]) - f) / sigma

    def jacobian(params: np.ndarray) -> np.ndarray:
        p0, c = params
        decay = np.exp(-2.0 * c * n)
        return np.column_stack([decay / sigma, -(2.0 * p0 - 1.0) * n * decay / sigma])

    result = least_squares(
        residuals,
        _initial_guess(n, f),
        jac=jacobian,
        bounds=([0.0, 0.0], [1.0, np.inf]),
        method="trf",
        x_scale="jac",
        ftol=FIT_TOLERANCE,
        xtol=FIT_TOLERANCE,
        gtol=FIT_TOLERANCE,
        max_nfev=1000,
    )
    diagnostics = {"status": result.status, "message": result.message, "nfev": result.nfev, "x": result.x.tolist()}
    if not result.success or not np.all(np.isfinite(result.x)):
        raise FitError(f"decay fit failed for ion {curve.ion_index + 1}: {result.message}", diagnostics)
    logger.debug("decay fit ion=%d: %s", curve.ion_index + 1, diagnostics)

    jac = jacobian(result.x)
    covariance = np.linalg.pinv(jac.T @ jac)
    p0, c = (float(v) for v in result.x)
    c_sigma = float(np.sqrt(max(covariance[1, 1], 0.0)))
    upper_bound = None
    if c <= c_sigma:
        upper_bound = c + 2.0 * c_sigma
        if c < 1e-3 * c_sigma:
            c = 0.0
    dof = n.size - 2
    return FitResult(
        p0=p0,
        crosstalk=c,
        covariance=covariance,
        reduced_chi2=float(2.0 * result.cost / dof),
        upper_bound=upper_bound,
        nfev=int(result.nfev),
    )


def fit_count_table(counts: pd.DataFrame, input_state: InputState | str) -> pd.DataFrame:
    """Fit every (addressed ion, duration, ion) curve of a benchmark count table.

    Curves with fewer than three N values only report p0 from the shortest
    sequence.
    """
    input_state = InputState(input_state)
    rows: list[dict[str, object]] = []
    for (addressed, duration, ion), group in counts.groupby(["addressed_ion", "pulse_duration_s", "ion_index"], sort=True):
        curve = fidelity_from_counts(group, input_state, ion_index=int(ion) - 1, addressed_index=int(addressed) - 1)
        row: dict[str, object] = {"addressed_ion": int(addressed), "pulse_duration_s": float(duration), "ion_index": int(ion)}
        if len(curve.points) < MIN_FIT_POINTS:
            first = curve.points[0]
            row.update(p0=first.fidelity_mean, p0_sigma=first.stderr, c=np.nan, c_sigma=np.nan, c_upper_bound=None)
            row.update(reduced_chi2=np.nan, status="insufficient_points")
        else:
            try:
                row.update(fit_decay(curve).to_dict(), status="ok")
            except FitError as exc:
                logger.warning("fit failed addressed=%d ion=%d: %s", addressed, ion, exc)
                row.update(p0=np.nan, p0_sigma=np.nan, c=np.nan, c_sigma=np.nan, c_upper_bound=None)
                row.update(reduced_chi2=np.nan, status="fit_failed")
        rows.append(row)
    return pd.DataFrame(rows)
