"""Command-line entry point: one subcommand per experiment, CSV/JSON outputs plus a run manifest.

Usage:
    uv run python -m scripts.run_experiment benchmark --config data/configs/byte.toml --out out/byte
"""
from __future__ import annotations

import argparse
import json
import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis.fidelity import fit_count_table
from .analysis.matrix import crosstalk_matrix, expected_crosstalk_matrix
from .analysis.oracle import oracle_comparison
from .benchmark.protocol import rabi_scan, spectrum_scan
from .benchmark.runner import run_benchmark
from .config import RunConfig, build_plan, build_readout, build_register, load_config
from .errors import ConfigError, NumericalError, OptimizationError
from .optimizer.commensurate import OptimizerSettings, optimize
from .optimizer.scaling import error_budget
from .register.chain import chain_table, next_neighbor_detunings
from .register.types import Channel
from .run_manifest import build_run_manifest, write_run_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
MAX_SEED = 2**64 - 1
# pulse-length window of the drift-averaged expected matrix, relative to tau
EXPECTED_WINDOW_FRACTION = 0.04


@dataclass(frozen=True)
class CommandContext:
    config: RunConfig
    out_dir: Path
    seed: int | None = None
    trials: int | None = None
    threads: int = 1


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def _write_json(data: object, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _records(frame: pd.DataFrame) -> list[dict[str, object]]:
    return frame.astype(object).where(frame.notna(), None).to_dict("records")


def cmd_positions(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    table = chain_table(register.chain, register.transitions)
    detunings = np.append(next_neighbor_detunings(register.transitions), np.nan)
    table["next_neighbor_detuning_hz"] = detunings
    return [_write_csv(table, ctx.out_dir / "positions.csv")]


def cmd_spectrum(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    section = ctx.config.section("spectrum")
    margin = float(section.get("margin_hz", 2e6))
    step = float(section.get("step_hz", 5e3))
    sigma_plus = register.transitions.sigma_plus_hz
    grid = np.arange(sigma_plus.min() - margin, sigma_plus.max() + margin + step / 2, step)
    scan = spectrum_scan(
        register.chain,
        register.transitions,
        register.rabi,
        float(section.get("duration_s", 10e-6)),
        grid,
    )
    return [_write_csv(scan.to_frame(), ctx.out_dir / "spectrum.csv")]


def cmd_rabi(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    section = ctx.config.section("rabi")
    plan = build_plan(ctx.config)
    addressed = int(section.get("addressed_ion", 1)) - 1
    durations = np.linspace(0.0, float(section.get("max_duration_s", 60e-6)), int(section.get("points", 601)))
    scan = rabi_scan(register.transitions, register.rabi, plan.carrier_hz(register, addressed), durations)
    frame = scan.to_frame()
    frame.insert(0, "addressed_ion", addressed + 1)
    return [_write_csv(frame, ctx.out_dir / "rabi.csv")]


def cmd_benchmark(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    plan = build_plan(ctx.config, seed=ctx.seed, trials=ctx.trials, threads=ctx.threads)
    counts = run_benchmark(register, plan, build_readout(ctx.config))
    fits = fit_count_table(counts, plan.input_state)
    summary = {
        "input_state": plan.input_state.value,
        "qubit": plan.qubit.name.lower(),
        "seed": plan.seed,
        "trials": plan.trials,
        "n_values": sorted(plan.n_values),
        "pulse_durations_s": list(plan.sweep_durations()),
        "addressed_ions": [i + 1 for i in plan.addressed_ions],
        "fits": _records(fits),
    }
    return [
        _write_csv(counts, ctx.out_dir / "benchmark_counts.csv"),
        _write_csv(fits, ctx.out_dir / "benchmark_fits.csv"),
        _write_json(summary, ctx.out_dir / "benchmark_summary.json"),
    ]


def cmd_xtalk(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    plan = build_plan(ctx.config, seed=ctx.seed, trials=ctx.trials, threads=ctx.threads)
    matrix, counts = crosstalk_matrix(register, plan, build_readout(ctx.config))
    expected = expected_crosstalk_matrix(
        register,
        plan.pulse_duration_s,
        qubit=plan.qubit,
        carrier_offset_hz=plan.carrier_offset_hz,
        window_s=EXPECTED_WINDOW_FRACTION * plan.pulse_duration_s,
    )
    report = {
        "pulse_duration_s": plan.pulse_duration_s,
        "input_state": plan.input_state.value,
        "seed": plan.seed,
        "trials": plan.trials,
        "entries": matrix.to_records(),
        "expected": [{k: v for k, v in r.items() if k != "c_sigma"} for r in expected.to_records()],
        "failures": [{"addressed": i + 1, "spectator": j + 1, "message": m} for (i, j), m in sorted(matrix.failures.items())],
    }
    return [
        _write_json(report, ctx.out_dir / "crosstalk_matrix.json"),
        _write_csv(matrix.to_table_frame(), ctx.out_dir / "crosstalk_table.csv"),
        _write_csv(expected.to_table_frame(), ctx.out_dir / "crosstalk_expected_table.csv"),
        _write_csv(counts, ctx.out_dir / "crosstalk_counts.csv"),
    ]


def _optimizer_settings(config: RunConfig) -> OptimizerSettings:
    section = config.section("optimizer")
    harmonic = section.get("harmonic", "search")
    return OptimizerSettings(
        harmonic=None if harmonic == "search" else int(harmonic),
        rabi_target_hz=section.get("rabi_target_hz"),
        bias_multiplier=int(section.get("bias_multiplier", 1)),
        tau_min_s=section.get("tau_min_s"),
        tau_max_s=section.get("tau_max_s"),
        tau_points=int(section.get("tau_points", 2001)),
        joint=bool(section.get("joint", False)),
        max_harmonic=int(section.get("max_harmonic", 200)),
        max_multiplier=int(section.get("max_multiplier", 4)),
    )


def cmd_optimize(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    report = optimize(register, _optimizer_settings(ctx.config))
    objective = pd.DataFrame({"tau_s": report.objective.taus_s, "objective": report.objective.values})
    return [
        _write_json(report.to_dict(), ctx.out_dir / "optimization_report.json"),
        _write_csv(objective, ctx.out_dir / "objective.csv"),
        _write_csv(report.commensurability, ctx.out_dir / "commensurability.csv"),
    ]


def cmd_scaling(ctx: CommandContext) -> list[Path]:
    register = build_register(ctx.config)
    section = ctx.config.section("scaling")
    budget = error_budget(
        rabi_hz=float(register.rabi.rabi_hz[0, Channel.SIGMA_PLUS]),
        detuning_hz=float(section.get("detuning_hz", 2e6)),
        duration_s=float(ctx.config.get("pulses", "duration_s", 25e-6)),
        j_hz=float(section.get("j_hz", 33.0)),
        ratios=(
            float(section.get("rabi_ratio", 1.0)),
            float(section.get("gradient_ratio", 1.0)),
            float(section.get("secular_ratio", 1.0)),
        ),
        sideband=register.sideband,
    )
    return [_write_csv(budget, ctx.out_dir / "error_budget.csv")]


def cmd_oracle(ctx: CommandContext) -> list[Path]:
    section = ctx.config.section("oracle")
    seed = ctx.seed if ctx.seed is not None else int(ctx.config.get("benchmark", "seed", 0))
    frame = oracle_comparison(
        section.get("crosstalk_values", [1e-5, 1e-4, 1e-3]),
        int(section.get("n_pulses", 1250)),
        walkers=int(section.get("walkers", 10_000)),
        trials=int(ctx.trials or section.get("trials", 2000)),
        seed=seed,
        threads=ctx.threads,
    )
    return [_write_csv(frame, ctx.out_dir / "oracle.csv")]


COMMANDS: dict[str, Callable[[CommandContext], list[Path]]] = {
    "positions": cmd_positions,
    "spectrum": cmd_spectrum,
    "rabi": cmd_rabi,
    "benchmark": cmd_benchmark,
    "xtalk": cmd_xtalk,
    "optimize": cmd_optimize,
    "scaling": cmd_scaling,
    "oracle": cmd_oracle,
}


def run_command(
    command: str,
    config_path: Path,
    out_dir: Path,
    *,
    seed: int | None = None,
    trials: int | None = None,
    threads: int = 1,
) -> list[Path]:
    """Run one command and write its outputs plus run_manifest.json into out_dir."""
    config = load_config(config_path)
    if trials is not None and trials < 1:
        raise ConfigError("--trials must be >= 1")
    if seed is not None and not 0 <= seed <= MAX_SEED:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    ctx = CommandContext(config=config, out_dir=out_dir, seed=seed, trials=trials, threads=threads)
    logger.info("%s: config=%s out=%s", command, config_path, out_dir)
    outputs = COMMANDS[command](ctx)
    manifest = build_run_manifest(
        command=command,
        config=config,
        out_dir=out_dir,
        outputs=outputs,
        seed=seed if seed is not None else config.get("benchmark", "seed"),
        trials=trials if trials is not None else config.get("benchmark", "trials"),
        threads=threads,
    )
    return [*outputs, write_run_manifest(out_dir, manifest)]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Simulate microwave cross-talk in a trapped-ion register.")
    parser.add_argument("command", choices=sorted(COMMANDS), help="Experiment to run.")
    parser.add_argument("--config", type=Path, required=True, help="TOML run configuration.")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory.")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides the config).")
    parser.add_argument("--trials", type=int, default=None, help="Trials per point (overrides the config).")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads for trial chunks.")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        parser.error("--threads must be >= 1")

    try:
        run_command(
            args.command,
            args.config,
            args.out.resolve(),
            seed=args.seed,
            trials=args.trials,
            threads=args.threads,
        )
    except (ConfigError, OptimizationError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
