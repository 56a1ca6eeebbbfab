import json
from pathlib import Path

import pandas as pd
import pytest

from scripts import run_experiment
from scripts.config import CONFIG_DIR
from scripts.errors import NumericalError
from scripts.run_manifest import MANIFEST_FILENAME, SCHEMA_VERSION

BYTE = CONFIG_DIR / "byte.toml"
THREE_IONS = CONFIG_DIR / "three_ion_optimized.toml"
SINGLE_ION = CONFIG_DIR / "single_ion.toml"


def _manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / MANIFEST_FILENAME).read_text(encoding="utf-8"))


def test_positions_command_writes_table_and_manifest(tmp_path: Path) -> None:
    assert run_experiment.main(["positions", "--config", str(BYTE), "--out", str(tmp_path)]) == 0

    table = pd.read_csv(tmp_path / "positions.csv")
    manifest = _manifest(tmp_path)

    assert table["ion_index"].tolist() == list(range(1, 9))
    assert table["position_m"].is_monotonic_increasing
    assert table["next_neighbor_detuning_hz"].iloc[:-1].between(1.5e6, 3.2e6).all()
    assert pd.isna(table["next_neighbor_detuning_hz"].iloc[-1])
    assert manifest["schema_version"] == SCHEMA_VERSION
    assert manifest["command"] == "positions"
    assert manifest["config"]["path"] == "byte.toml"
    assert list(manifest["assets"]) == ["positions.csv"]
    assert manifest["assets"]["positions.csv"]["size_bytes"] > 0
    assert manifest["seed"] == 20160811


def test_scaling_command_reports_the_light_shift_row(tmp_path: Path) -> None:
    run_experiment.run_command("scaling", BYTE, tmp_path)

    budget = pd.read_csv(tmp_path / "error_budget.csv").set_index("source")

    assert 5.9e-5 <= budget.loc["light_shift", "value"] <= 6.2e-5
    assert budget.loc["j_coupling", "value"] == pytest.approx(6.7e-6, rel=0.02)


def test_optimize_command_writes_report(tmp_path: Path) -> None:
    outputs = run_experiment.run_command("optimize", THREE_IONS, tmp_path)

    report = json.loads((tmp_path / "optimization_report.json").read_text(encoding="utf-8"))

    assert {p.name for p in outputs} == {
        "optimization_report.json",
        "objective.csv",
        "commensurability.csv",
        MANIFEST_FILENAME,
    }
    assert report["harmonic"] == 27
    assert report["tau_s"] == pytest.approx(8.641e-6, rel=1e-3)
    assert len(pd.read_csv(tmp_path / "objective.csv")) == 2001


def test_benchmark_reruns_are_byte_identical(tmp_path: Path) -> None:
    first, second = tmp_path / "first", tmp_path / "second"
    args = ["benchmark", "--config", str(SINGLE_ION), "--trials", "8", "--seed", "42"]

    assert run_experiment.main([*args, "--out", str(first)]) == 0
    assert run_experiment.main([*args, "--out", str(second), "--threads", "2"]) == 0

    names = sorted(p.name for p in first.iterdir())
    assert names == ["benchmark_counts.csv", "benchmark_fits.csv", "benchmark_summary.json", MANIFEST_FILENAME]
    for name in names:
        if name == MANIFEST_FILENAME:
            continue
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert _manifest(first)["assets"] == _manifest(second)["assets"]
    assert _manifest(first)["trials"] == 8
    assert _manifest(second)["threads"] == 2


def test_bad_config_exits_with_code_2(tmp_path: Path) -> None:
    config = tmp_path / "bad.toml"
    config.write_text(BYTE.read_text(encoding="utf-8") + "\n[pulses2]\nrabi_hz = 1\n", encoding="utf-8")

    assert run_experiment.main(["positions", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out" / MANIFEST_FILENAME).exists()


def test_infeasible_optimization_exits_with_code_2(tmp_path: Path) -> None:
    assert run_experiment.main(["optimize", "--config", str(SINGLE_ION), "--out", str(tmp_path)]) == 2


def test_invalid_trials_override_exits_with_code_2(tmp_path: Path) -> None:
    assert run_experiment.main(["positions", "--config", str(BYTE), "--out", str(tmp_path), "--trials", "0"]) == 2


def test_numerical_failure_exits_with_code_3(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    def failing(ctx):
        raise NumericalError("equilibrium solve did not converge")

    monkeypatch.setitem(run_experiment.COMMANDS, "positions", failing)

    assert run_experiment.main(["positions", "--config", str(BYTE), "--out", str(tmp_path)]) == 3


def test_non_positive_constant_exits_with_code_2(tmp_path: Path) -> None:
    config = tmp_path / "zero_zeeman.toml"
    config.write_text(
        BYTE.read_text(encoding="utf-8") + "\n[constants]\nzeeman_coefficient_hz_per_t = 0.0\n",
        encoding="utf-8",
    )

    assert run_experiment.main(["positions", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out" / "positions.csv").exists()


def test_manifest_has_no_wall_clock_fields(tmp_path: Path) -> None:
    run_experiment.run_command("positions", BYTE, tmp_path)

    manifest = _manifest(tmp_path)

    assert set(manifest) == {"schema_version", "project", "command", "config", "seed", "trials", "threads", "versions", "assets"}
    assert not any("time" in key or "date" in key for key in manifest)
