import numpy as np
import pandas as pd
import pytest
from scipy.optimize import OptimizeResult

from scripts.analysis import fidelity as fidelity_mod
from scripts.analysis.matrix import (
    CrosstalkMatrix,
    crosstalk_matrix,
    expected_crosstalk_matrix,
    matrix_from_counts,
    single_pulse_leakage,
)
from scripts.benchmark.runner import BenchmarkPlan
from scripts.config import CONFIG_DIR, build_register, load_config, parse_config
from scripts.register.pulses import generalized_rabi
from scripts.register.types import Register

TWO_IONS = """
[trap]
ion_count = 2
secular_frequency_hz = 124e3

[field]
gradient_t_per_m = 18.8
bias_t = 3e-4

[pulses]
rabi_hz = 60e3
pi_weight = 0.0
sigma_minus_weight = 0.0
"""


@pytest.fixture(scope="module")
def two_ions() -> Register:
    return build_register(parse_config(TWO_IONS))


@pytest.fixture(scope="module")
def byte_register() -> Register:
    return build_register(load_config(CONFIG_DIR / "byte.toml"))


def _resonant_duration(register: Register) -> float:
    detuning = float(np.diff(register.transitions.sigma_plus_hz)[0])
    # odd number of half cycles at the generalized Rabi frequency
    return 20.5 / float(generalized_rabi(60e3, detuning))


def test_two_ion_expected_matrix_is_symmetric(two_ions: Register) -> None:
    expected = expected_crosstalk_matrix(two_ions, _resonant_duration(two_ions))

    assert np.isnan(expected.values[0, 0]) and np.isnan(expected.values[1, 1])
    assert expected.values[0, 1] == pytest.approx(expected.values[1, 0], rel=1e-9)
    assert expected.values[0, 1] > 1e-4


def test_two_ion_benchmark_matrix_matches_single_pulse_leakage(two_ions: Register) -> None:
    tau = _resonant_duration(two_ions)
    plan = BenchmarkPlan(
        addressed_ions=(0, 1),
        n_values=(0, 250, 500, 750, 1000),
        trials=200,
        seed=99,
        pulse_duration_s=tau,
    )

    matrix, counts = crosstalk_matrix(two_ions, plan)
    expected = expected_crosstalk_matrix(two_ions, tau)

    assert len(counts) == 2 * 5 * 2
    for i, j in ((0, 1), (1, 0)):
        assert abs(matrix.values[i, j] - expected.values[i, j]) < 4 * matrix.sigmas[i, j]
    combined = np.hypot(matrix.sigmas[0, 1], matrix.sigmas[1, 0])
    assert abs(matrix.values[0, 1] - matrix.values[1, 0]) < 3 * combined


def test_single_pulse_leakage_flips_the_addressed_ion(two_ions: Register) -> None:
    carrier = two_ions.transitions.sigma_plus_hz[0]

    leakage = single_pulse_leakage(two_ions, carrier, 1 / (2 * 60e3))

    assert leakage[0] == pytest.approx(1.0, abs=1e-12)
    assert leakage[1] < 1e-3


def test_next_neighbors_dominate_each_row_of_the_byte(byte_register: Register) -> None:
    expected = expected_crosstalk_matrix(byte_register, 25e-6, window_s=1e-6)
    neighbors = expected.neighbor_mask()
    others = expected.non_neighbor_mask()

    for row in range(expected.ion_count):
        assert expected.row_mean(row, neighbors) > expected.row_mean(row, others)


def test_row_next_to_the_pi_resonance_has_larger_far_crosstalk(byte_register: Register) -> None:
    expected = expected_crosstalk_matrix(byte_register, 25e-6, window_s=1e-6)
    others = expected.non_neighbor_mask()

    assert expected.row_mean(0, others) > 1.5 * expected.row_mean(7, others)


def test_expected_matrix_rejects_bad_windows(two_ions: Register) -> None:
    with pytest.raises(ValueError, match="window_s"):
        expected_crosstalk_matrix(two_ions, 5e-6, window_s=10e-6)
    with pytest.raises(ValueError, match="duration_s"):
        expected_crosstalk_matrix(two_ions, 0.0)


def test_matrix_records_and_table_cells() -> None:
    values = np.array([[0.0, 7.6e-5, np.nan], [2e-5, 0.0, 1.5e-5], [0.0, 3e-6, 0.0]])
    sigmas = np.array([[0.0, 1.3e-5, np.nan], [0.4e-5, 0.0, np.nan], [0.0, 1e-6, 0.0]])
    matrix = CrosstalkMatrix(values, sigmas)

    records = matrix.to_records()
    table = matrix.to_table_frame()

    assert len(records) == 6
    assert records[0] == {"addressed": 1, "spectator": 2, "c": 7.6e-5, "c_sigma": 1.3e-5}
    assert records[1]["c"] is None
    assert table.columns.tolist() == ["addressed_ion", "spectator_1 (x1e-5)", "spectator_2 (x1e-5)", "spectator_3 (x1e-5)"]
    assert table.loc[0, "spectator_2 (x1e-5)"] == "7.6(1.3)"
    assert table.loc[0, "spectator_3 (x1e-5)"] == ""
    assert table.loc[1, "spectator_3 (x1e-5)"] == "1.5"
    assert table.loc[1, "spectator_2 (x1e-5)"] == ""
    assert values[0, 0] == 0.0


def test_matrix_rejects_negative_entries() -> None:
    with pytest.raises(ValueError, match=">= 0"):
        CrosstalkMatrix(np.array([[0.0, -1e-5], [0.0, 0.0]]), np.zeros((2, 2)))


def _counts() -> pd.DataFrame:
    rows = []
    for addressed in (1, 2):
        for n in (0, 250, 500, 750):
            for ion in (1, 2):
                rows.append(
                    {
                        "addressed_ion": addressed,
                        "pulse_duration_s": 25e-6,
                        "N": n,
                        "ion_index": ion,
                        "trials": 1000,
                        "bright_count": 10 + n // 25,
                    }
                )
    return pd.DataFrame(rows)


def test_matrix_from_counts_fits_off_diagonal_entries() -> None:
    matrix = matrix_from_counts(_counts(), 2, "eigenstate")

    assert not matrix.failures
    assert np.all(np.isfinite(matrix.values[[0, 1], [1, 0]]))
    assert matrix.values[0, 1] == pytest.approx(matrix.values[1, 0])


def test_failed_fits_leave_nan_entries(monkeypatch: pytest.MonkeyPatch) -> None:
    def failing(*args, **kwargs):
        return OptimizeResult(success=False, status=0, message="stuck", nfev=3, x=np.array([0.9, 1e-4]), cost=1.0)

    monkeypatch.setattr(fidelity_mod, "least_squares", failing)

    matrix = matrix_from_counts(_counts(), 2, "eigenstate")

    assert set(matrix.failures) == {(0, 1), (1, 0)}
    assert np.all(np.isnan(matrix.values))
    assert all(record["c"] is None for record in matrix.to_records())


def test_pooled_duration_sweep_counts_as_one_curve() -> None:
    counts = _counts()
    doubled = pd.concat([counts, counts.assign(pulse_duration_s=26e-6)], ignore_index=True)

    single = matrix_from_counts(counts, 2, "eigenstate")
    pooled = matrix_from_counts(doubled, 2, "eigenstate")

    assert pooled.values[0, 1] == pytest.approx(single.values[0, 1], rel=0.02)
    assert pooled.sigmas[0, 1] < single.sigmas[0, 1]


@pytest.fixture(scope="module")
def byte_benchmark_matrix(byte_register: Register) -> CrosstalkMatrix:
    plan = BenchmarkPlan(
        addressed_ions=tuple(range(8)),
        n_values=(0, 1500, 3000),
        trials=64,
        seed=20160811,
        pulse_duration_s=25e-6,
        durations_s=tuple(float(t) for t in np.linspace(24.5e-6, 25.5e-6, 11)),
    )
    matrix, _ = crosstalk_matrix(byte_register, plan)
    return matrix


def test_byte_benchmark_next_neighbors_dominate_within_one_sigma(byte_benchmark_matrix: CrosstalkMatrix) -> None:
    matrix = byte_benchmark_matrix
    neighbors = matrix.neighbor_mask()
    others = matrix.non_neighbor_mask()

    assert not matrix.failures
    for row in range(matrix.ion_count):
        for j in np.flatnonzero(neighbors[row]):
            for k in np.flatnonzero(others[row]):
                sigma = np.hypot(matrix.sigmas[row, j], matrix.sigmas[row, k])
                assert matrix.values[row, j] >= matrix.values[row, k] - sigma


def test_byte_benchmark_far_crosstalk_is_larger_near_the_pi_resonance(byte_benchmark_matrix: CrosstalkMatrix) -> None:
    matrix = byte_benchmark_matrix
    others = matrix.non_neighbor_mask()

    near = np.nanmean(np.where(others[[0, 1]], matrix.values[[0, 1]], np.nan))
    far = np.nanmean(np.where(others[[6, 7]], matrix.values[[6, 7]], np.nan))

    assert near > far
