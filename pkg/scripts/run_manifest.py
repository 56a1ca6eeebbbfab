"""Per-run manifest: config digest, seed, trial count, dependency versions and output checksums.

The manifest carries no wall-clock time, so identical reruns write identical files.
"""
from __future__ import annotations

import hashlib
import json
import platform
from importlib import metadata
from pathlib import Path

from .config import RunConfig

SCHEMA_VERSION = 1
MANIFEST_FILENAME = "run_manifest.json"
PROJECT_NAME = "ion-crosstalk-sim"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas")


def _compute_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        while True:
            chunk = handle.read(1024 * 1024)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def build_run_manifest(
    *,
    command: str,
    config: RunConfig,
    out_dir: Path,
    outputs: list[Path],
    seed: int | None,
    trials: int | None,
    threads: int,
) -> dict[str, object]:
    """Manifest of one command run; no wall-clock fields so reruns are byte-identical."""
    assets: dict[str, dict[str, object]] = {}
    missing: list[str] = []
    for path in outputs:
        if not path.is_file():
            missing.append(path.name)
            continue
        assets[path.relative_to(out_dir).as_posix()] = {
            "size_bytes": int(path.stat().st_size),
            "sha256": _compute_sha256(path),
        }
    if missing:
        raise FileNotFoundError(f"missing output file(s): {', '.join(missing)}")

    return {
        "schema_version": SCHEMA_VERSION,
        "project": PROJECT_NAME,
        "command": command,
        "config": {"path": config.path.name, "sha256": config.sha256},
        "seed": seed,
        "trials": trials,
        "threads": threads,
        "versions": package_versions(),
        "assets": dict(sorted(assets.items())),
    }


def write_run_manifest(out_dir: Path, manifest: dict[str, object]) -> Path:
    path = out_dir / MANIFEST_FILENAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path
