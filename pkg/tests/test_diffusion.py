import numpy as np
import pytest

from scripts.analysis.diffusion import diffusion_density, mean_fidelity, random_walk_oracle
from scripts.analysis.fidelity import predict_fidelity
from scripts.analysis.oracle import ORACLE_COLUMNS, oracle_comparison, spectator_register
from scripts.register.pulses import crosstalk_probability

GRID = 2 * np.pi * np.arange(8192) / 8192


@pytest.mark.parametrize("dt", [1e-3, 0.01, 0.1, 0.5, 2.0, 10.0])
def test_density_is_normalized(dt: float) -> None:
    density = diffusion_density(GRID, dt)

    assert np.all(density >= -1e-12)
    assert abs(2 * np.pi * density.mean() - 1.0) < 1e-8


def test_density_peaks_at_the_dark_pole_and_flattens() -> None:
    early = diffusion_density(GRID, 0.01)
    late = diffusion_density(GRID, 20.0)

    assert GRID[np.argmax(early)] == pytest.approx(np.pi, abs=1e-3)
    np.testing.assert_allclose(late, 1 / (2 * np.pi), atol=1e-8)


def test_both_density_branches_agree_at_the_switch() -> None:
    below = diffusion_density(GRID, 0.0499)
    series = diffusion_density(GRID, 0.0501)

    np.testing.assert_allclose(below, series, rtol=0.02, atol=1e-6)


def test_mean_fidelity_matches_closed_form() -> None:
    c, n = 1e-4, 1000

    assert mean_fidelity(2 * c * n) == pytest.approx(float(predict_fidelity(c, n)), abs=1e-6)
    assert mean_fidelity(0.01) == pytest.approx(0.5 * (1 + np.exp(-0.01)), abs=1e-6)


def test_negative_diffusion_time_is_rejected() -> None:
    with pytest.raises(ValueError):
        diffusion_density(GRID, -0.1)


def test_random_walk_without_crosstalk_stays_at_the_pole() -> None:
    estimate = random_walk_oracle(0.0, 500, 100, seed=3)

    assert estimate.mean == pytest.approx(1.0)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-15)


def test_random_walk_follows_the_decay_law() -> None:
    estimate = random_walk_oracle(1e-4, 5000, 4000, seed=11)

    assert abs(estimate.mean - 0.5 * (1 + np.exp(-1.0))) < 3 * estimate.stderr


def test_random_walk_is_seeded() -> None:
    assert random_walk_oracle(1e-3, 50, 64, seed=5) == random_walk_oracle(1e-3, 50, 64, seed=5)
    with pytest.raises(ValueError):
        random_walk_oracle(0.3, 10, 10, seed=1)


@pytest.mark.parametrize("c", [1e-5, 1e-4, 1e-3])
def test_spectator_register_leaks_exactly_c_per_pulse(c: float) -> None:
    register, offset, duration = spectator_register(c)

    rabi = register.rabi.rabi_hz[0, 1]
    assert crosstalk_probability(rabi, offset, duration) == pytest.approx(c, rel=1e-9)


def test_closed_form_random_walk_and_unitary_agree() -> None:
    frame = oracle_comparison([1e-5, 1e-4, 1e-3], 1250, walkers=10_000, trials=2000, seed=7)

    assert frame.columns.tolist() == list(ORACLE_COLUMNS)
    assert frame["c"].tolist() == [1e-5, 1e-4, 1e-3]
    for row in frame.itertuples(index=False):
        assert row.random_walk_stderr > 0
        assert row.unitary_stderr > 0
        assert row.diffusion_fidelity == pytest.approx(row.analytic_fidelity, abs=1e-6)
        assert abs(row.random_walk_fidelity - row.analytic_fidelity) < 3 * row.random_walk_stderr
        assert abs(row.unitary_fidelity - row.analytic_fidelity) < 3 * row.unitary_stderr
        joint_sigma = np.hypot(row.random_walk_stderr, row.unitary_stderr)
        assert abs(row.random_walk_fidelity - row.unitary_fidelity) < 3 * joint_sigma
