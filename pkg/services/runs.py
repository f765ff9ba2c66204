"""Run directories: deterministic naming, manifests and discovery for the run explorer."""

from __future__ import annotations

import json
import logging
import os
import platform
from importlib import metadata

from config.config import Config, RunConfig

LOGGER = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
_VERSIONED = ("numpy", "scipy", "pandas")


def run_dir_for(command: str, cfg: RunConfig, root: str | None = None, tag: str = "") -> str:
    """`<root>/<command>[-tag]-<hash prefix>`; identical inputs map to the same directory."""
    root = root or Config.RUNS_DIR
    name = f"{command}-{tag}-" if tag else f"{command}-"
    return os.path.join(root, name + cfg.config_hash()[:12])


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _VERSIONED:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "missing"
    return versions


def write_manifest(
    run_dir: str,
    command: str,
    cfg: RunConfig,
    inputs: dict | None = None,
    outputs: list[str] | None = None,
) -> str:
    """Record what produced a run directory: command, config + hash, seed, inputs, versions."""
    os.makedirs(run_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.model.seed,
        "inputs": inputs or {},
        "outputs": sorted(os.path.relpath(p, run_dir) for p in (outputs or [])),
        "versions": package_versions(),
    }
    path = os.path.join(run_dir, MANIFEST_FILE)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    LOGGER.info("Manifest written to %s", path)
    return path


def read_manifest(run_dir: str) -> dict:
    path = os.path.join(run_dir, MANIFEST_FILE)
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def list_runs(root: str | None = None) -> list[str]:
    """Run directories under `root` that carry a manifest, sorted by name."""
    root = root or Config.RUNS_DIR
    if not os.path.isdir(root):
        return []
    return sorted(
        os.path.join(root, name)
        for name in os.listdir(root)
        if os.path.exists(os.path.join(root, name, MANIFEST_FILE))
    )
