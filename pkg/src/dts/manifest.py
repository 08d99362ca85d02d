"""Run manifest: enough recorded state to reproduce every artifact.

The manifest holds the config hash, per-stage derived seeds, content
digests of each stage's inputs and outputs, timings, and counters such as
dropped items or suppressed carousels. Digests are sha256 over file bytes,
so a deterministic re-run can be verified by recomputing them. Timings are
informational and deliberately excluded from any equality contract.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .binio import atomic_write_text

MANIFEST_NAME = "run_manifest.json"


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_digest(payload: dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunManifest:
    def __init__(self, path: Path, data: dict[str, Any] | None = None):
        self.path = Path(path)
        self.data: dict[str, Any] = data if data is not None else {
            "config_hash": None, "stages": {}}

    @classmethod
    def load(cls, workdir: Path) -> "RunManifest":
        path = Path(workdir) / MANIFEST_NAME
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                return cls(path, json.load(fh))
        return cls(path)

    @property
    def config_hash(self) -> str | None:
        return self.data.get("config_hash")

    def set_config_hash(self, value: str) -> None:
        self.data["config_hash"] = value

    def record_stage(self, stage: str, *, seed: int, elapsed_s: float,
                     inputs: dict[str, str], outputs: dict[str, str],
                     counters: dict[str, Any]) -> dict[str, Any]:
        record = {
            "config_hash": self.data["config_hash"],
            "seed": seed,
            "elapsed_s": round(elapsed_s, 6),
            "inputs": inputs,
            "outputs": outputs,
            "counters": counters,
        }
        self.data["stages"][stage] = record
        return record

    def stage(self, name: str) -> dict[str, Any] | None:
        return self.data["stages"].get(name)

    def save(self) -> None:
        atomic_write_text(self.path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")
