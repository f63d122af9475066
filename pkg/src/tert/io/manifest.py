"""Run manifests: config hash, seed, content hashes of outputs, wall time."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


class RunManifest:
    """Collects metadata during a run and writes manifest.json at the end."""

    def __init__(self, command: str, config_dict: dict, seed: int):
        self.started = time.time()
        self.data = {
            "command": command,
            "seed": seed,
            "config": config_dict,
            "config_hash": sha256_text(json.dumps(config_dict, sort_keys=True)),
            "inputs": {},
            "outputs": {},
        }

    def add_input(self, path) -> None:
        self.data["inputs"][str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.data["outputs"][str(path)] = sha256_file(path)

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.data["wall_time_s"] = round(time.time() - self.started, 3)
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return path
