from pathlib import Path

import pytest

from scripts.benchmark.types import InputState
from scripts.config import CONFIG_DIR, RunConfig, build_plan, build_readout, build_register, load_config, parse_config
from scripts.errors import ConfigError
from scripts.register.types import Channel

MINIMAL = """\
[trap]
ion_count = 2
secular_frequency_hz = 124e3

[field]
gradient_t_per_m = 18.8
bias_t = 3e-4
"""


def test_minimal_config_builds_with_defaults() -> None:
    config = parse_config(MINIMAL)
    register = build_register(config)
    plan = build_plan(config)

    assert register.ion_count == 2
    assert register.rabi.rabi_hz.tolist() == [[20e3] * 3, [20e3] * 3]
    assert not register.coupling.enabled
    assert plan.addressed_ions == (0, 1)
    assert plan.n_values == (0, 250, 500, 750, 1000, 1250)
    assert plan.qubit == Channel.SIGMA_PLUS
    assert build_readout(config).p_prep == 1.0


def test_unknown_key_reports_its_line() -> None:
    text = MINIMAL + "\n[pulses]\nrabi_hz = 20e3\nrabbi = 1\n"

    with pytest.raises(ConfigError, match=r"<string>:11: \[pulses\] rabbi: unknown key"):
        parse_config(text)


def test_unknown_section_reports_its_line() -> None:
    with pytest.raises(ConfigError, match=r":9: \[laser\]: unknown section"):
        parse_config(MINIMAL + "\n[laser]\npower = 1\n")


def test_missing_required_key() -> None:
    text = MINIMAL.replace("bias_t = 3e-4\n", "")

    with pytest.raises(ConfigError, match="missing required key 'bias_t'"):
        parse_config(text)


@pytest.mark.parametrize(
    ("extra", "message"),
    [
        ('[benchmark]\ntrials = "many"\n', "must be an integer"),
        ("[benchmark]\nn_values = [0, 1.5]\n", "non-empty list of integers"),
        ("[model]\nj_enabled = 1\n", "true or false"),
        ('[optimizer]\nharmonic = "auto"\n', '"search"'),
    ],
)
def test_type_errors_are_rejected(extra: str, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        parse_config(MINIMAL + "\n" + extra)


@pytest.mark.parametrize(
    ("extra", "message"),
    [
        ("[pulses]\nrabi_hz = [20e3, 30e3, 40e3]\n", "has 3 values for 2 ions"),
        ("[benchmark]\naddressed_ions = [3]\n", r"must lie in 1\.\.2"),
        ("[benchmark]\nseed = -1\n", "unsigned 64-bit"),
        ("[benchmark]\nn_values = [0, 10, 10]\n", "unique"),
        ('[benchmark]\nqubit = "sigma"\n', "unknown channel"),
        ("[pulses]\nduration_s = 0.0\n", "must be positive"),
        ("[model]\nreadout_p = 0.4\n", r"\(0.5, 1\]"),
        ("[optimizer]\ntau_min_s = 9e-6\ntau_max_s = 8e-6\n", "must exceed tau_min_s"),
        ("[constants]\nzeeman_coefficient_hz_per_t = 0.0\n", r"\[constants\] zeeman_coefficient_hz_per_t: must be positive"),
        ("[constants]\nhyperfine_splitting_hz = -1.0\n", "must be positive"),
        ("[model]\nmode_frequency_hz = 0.0\n", "must be positive"),
    ],
)
def test_range_errors_are_rejected(extra: str, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        parse_config(MINIMAL + "\n" + extra)


def test_invalid_toml_is_a_config_error() -> None:
    with pytest.raises(ConfigError, match="invalid TOML"):
        parse_config("[trap\nion_count = 2\n")


def test_missing_file_is_a_config_error(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("name", ["byte.toml", "byte_spectroscopy.toml", "single_ion.toml", "three_ion_optimized.toml"])
def test_shipped_configs_load(name: str) -> None:
    config = load_config(CONFIG_DIR / name)

    register = build_register(config)
    plan = build_plan(config)

    assert register.ion_count == config.get("trap", "ion_count")
    assert all(0 <= i < register.ion_count for i in plan.addressed_ions)
    assert len(config.sha256) == 64


def test_cli_overrides_replace_config_values() -> None:
    config = load_config(CONFIG_DIR / "byte.toml")

    plan = build_plan(config, seed=5, trials=32, threads=3)

    assert (plan.seed, plan.trials, plan.threads) == (5, 32, 3)
    assert build_plan(config).seed == 20160811
    assert plan.input_state == InputState.EIGENSTATE


def test_single_ion_config_drives_the_pi_channel_off_resonance() -> None:
    config = load_config(CONFIG_DIR / "single_ion.toml")
    register = build_register(config)
    plan = build_plan(config)

    assert plan.qubit == Channel.PI
    assert plan.carrier_hz(register, 0) == pytest.approx(register.transitions.pi_hz[0] + 2e6)
    assert len(plan.sweep_durations()) == 21
    assert build_readout(config).p_prep == 0.975


def test_constants_rejected_by_the_model_become_config_errors() -> None:
    config = parse_config(MINIMAL)
    sections = {**config.sections, "constants": {"hyperfine_splitting_hz": -1.0}}
    broken = RunConfig(config.path, config.text, config.sha256, sections)

    with pytest.raises(ConfigError, match=r"\[constants\]: hyperfine_splitting_hz must be positive"):
        build_register(broken)
