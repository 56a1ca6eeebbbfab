import numpy as np
import pytest

from scripts.errors import SolverError
from scripts.register import chain as chain_mod
from scripts.register.chain import (
    chain_table,
    equilibrium_positions,
    length_scale,
    next_neighbor_detunings,
    transition_map,
)
from scripts.register.types import FieldConfig, PhysicalConstants, TrapConfig

CONSTANTS = PhysicalConstants()
# sigma+ addressing frequency differences of the eight-ion register, MHz
MEASURED_BYTE_DIFFERENCES_MHZ = [2.336, 2.024, 1.865, 1.852, 1.907, 2.020, 2.392]


def _trap(ion_count: int, secular_hz: float = 124e3) -> TrapConfig:
    return TrapConfig.for_species("171Yb+", secular_hz, ion_count)


def test_single_ion_sits_at_trap_center() -> None:
    chain = equilibrium_positions(_trap(1), CONSTANTS)

    assert chain.positions_m.tolist() == [0.0]


def test_two_ion_separation_matches_analytic_solution() -> None:
    chain = equilibrium_positions(_trap(2), CONSTANTS)
    scale = length_scale(_trap(2), CONSTANTS)

    assert scale == pytest.approx(11.0e-6, rel=0.01)
    assert chain.spacings_m[0] == pytest.approx(2 ** (1 / 3) * scale, rel=1e-10)
    assert chain.spacings_m[0] == pytest.approx(13.9e-6, rel=0.01)


def test_eight_ion_chain_is_symmetric_with_expected_central_spacing() -> None:
    chain = equilibrium_positions(_trap(8), CONSTANTS)

    assert np.all(np.diff(chain.positions_m) > 0)
    assert chain.positions_m.mean() == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(chain.positions_m, -chain.positions_m[::-1], atol=1e-16)
    central = chain.spacings_m.min()
    assert 6.9e-6 <= central <= 7.1e-6
    assert central / chain.length_scale_m == pytest.approx(0.63, abs=0.02)


def test_residual_force_is_negligible() -> None:
    chain = equilibrium_positions(_trap(8), CONSTANTS)
    u = chain.positions_m / chain.length_scale_m

    assert np.max(np.abs(chain_mod._forces(u))) < 1e-9


def test_positions_scale_with_secular_frequency() -> None:
    base = equilibrium_positions(_trap(5, 124e3), CONSTANTS)
    stiffer = equilibrium_positions(_trap(5, 248e3), CONSTANTS)

    np.testing.assert_allclose(stiffer.positions_m, base.positions_m * 2 ** (-2 / 3), rtol=1e-9, atol=1e-18)


def test_solver_failure_raises_with_diagnostics(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(chain_mod, "RESIDUAL_TOLERANCE", 0.0)

    with pytest.raises(SolverError) as excinfo:
        equilibrium_positions(_trap(3), CONSTANTS)

    assert excinfo.value.iterations > 0
    assert excinfo.value.residual >= 0.0


def test_single_ion_bias_shifts_sigma_transitions_symmetrically() -> None:
    chain = equilibrium_positions(_trap(1), CONSTANTS)
    transitions = transition_map(chain, FieldConfig(gradient_t_per_m=18.8, bias_t=0.857e-3), CONSTANTS)

    assert transitions.sigma_plus_hz[0] - transitions.pi_hz[0] == pytest.approx(12.0e6, rel=1e-3)
    assert transitions.sigma_minus_hz[0] - transitions.pi_hz[0] == pytest.approx(-12.0e6, rel=1e-3)


def test_zero_gradient_gives_degenerate_addressing() -> None:
    chain = equilibrium_positions(_trap(4), CONSTANTS)
    transitions = transition_map(chain, FieldConfig(gradient_t_per_m=0.0, bias_t=1e-4), CONSTANTS)

    assert np.ptp(transitions.sigma_plus_hz) == 0.0


def test_byte_addressing_differences_match_measured_within_ten_percent() -> None:
    chain = equilibrium_positions(_trap(8), CONSTANTS)
    transitions = transition_map(chain, FieldConfig(gradient_t_per_m=18.8, bias_t=3.93e-4), CONSTANTS)
    differences = next_neighbor_detunings(transitions)

    assert np.all(differences > 0)
    np.testing.assert_allclose(
        differences,
        CONSTANTS.zeeman_coefficient_hz_per_t * 18.8 * chain.spacings_m,
        rtol=1e-9,
    )
    measured = np.array(MEASURED_BYTE_DIFFERENCES_MHZ) * 1e6
    assert np.all(np.abs(differences - measured) / measured < 0.10)


def test_transition_map_is_linear_in_gradient() -> None:
    chain = equilibrium_positions(_trap(3), CONSTANTS)
    single = transition_map(chain, FieldConfig(18.8, 2e-4), CONSTANTS)
    double = transition_map(chain, FieldConfig(37.6, 2e-4), CONSTANTS)

    np.testing.assert_allclose(next_neighbor_detunings(double), 2 * next_neighbor_detunings(single), rtol=1e-9)
    np.testing.assert_allclose(
        single.sigma_plus_hz - single.pi_hz,
        -(single.sigma_minus_hz - single.pi_hz),
        rtol=1e-9,
    )


def test_chain_table_uses_one_based_ion_index() -> None:
    chain = equilibrium_positions(_trap(3), CONSTANTS)
    table = chain_table(chain, transition_map(chain, FieldConfig(18.8, 2e-4), CONSTANTS))

    assert list(table.columns) == ["ion_index", "position_m", "pi_hz", "sigma_plus_hz", "sigma_minus_hz"]
    assert table["ion_index"].tolist() == [1, 2, 3]
