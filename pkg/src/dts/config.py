"""Pipeline configuration: one TOML file drives every stage.

Sections map to stage parameter groups ([pipeline], [inputs], [synth],
[kge], [gatne], [recall], [ingest]); unknown sections or keys are
configuration errors so typos fail fast. Stage seeds are derived from the
single [pipeline].seed, never set per stage. CLI flags (--seed, --threads)
override after parsing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:                      # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .gatne import GatneConfig
from .kge import KgeConfig
from .numerics import stable_hash64
from .synth import SynthConfig

INPUT_NAMES = ("sessions", "catalog", "aspects", "similarity", "judgments")


@dataclass
class IngestParams:
    strict: bool = False
    anchor_min_degree: int = 1
    use_similarity: bool = True

    def validate(self) -> None:
        if self.anchor_min_degree < 0:
            raise ConfigError("ingest.anchor_min_degree must be non-negative")


@dataclass
class RecallParams:
    p: int = 50
    edge_type: str = "co_bought"
    normalize: bool = False
    min_support: int = 3
    header_policy: str = "hash"
    ndcg_k: int = 10

    def validate(self) -> None:
        if self.p < 1:
            raise ConfigError("recall.p must be >= 1")
        if self.edge_type not in ("co_bought", "co_atc"):
            raise ConfigError(f"unknown recall.edge_type {self.edge_type!r}")
        if self.min_support < 1:
            raise ConfigError("recall.min_support must be >= 1")
        if self.header_policy not in ("variant_a", "variant_b", "hash"):
            raise ConfigError(f"unknown recall.header_policy {self.header_policy!r}")
        if self.ndcg_k < 1:
            raise ConfigError("recall.ndcg_k must be >= 1")


@dataclass
class PipelineConfig:
    workdir: Path = Path("run")
    seed: int = 0
    threads: int = 1                      # 1 == deterministic single worker
    inputs: dict[str, Path] = field(default_factory=dict)
    synth: SynthConfig = field(default_factory=SynthConfig)
    kge: KgeConfig = field(default_factory=KgeConfig)
    gatne: GatneConfig = field(default_factory=GatneConfig)
    recall: RecallParams = field(default_factory=RecallParams)
    ingest: IngestParams = field(default_factory=IngestParams)

    def __post_init__(self):
        for name in INPUT_NAMES:
            self.inputs.setdefault(name, self.workdir / "data" / _default_input(name))

    def validate(self) -> None:
        if self.threads < 1:
            raise ConfigError("threads must be >= 1 (or the literal 'det')")
        self.synth.validate()
        self.kge.validate()
        self.gatne.validate()
        self.recall.validate()
        self.ingest.validate()

    @property
    def deterministic(self) -> bool:
        return self.threads == 1

    def input_path(self, name: str) -> Path:
        return self.inputs[name]

    def stage_seed(self, stage: str) -> int:
        """Stable per-stage seed derived from the global seed."""
        return stable_hash64(f"{self.seed}:{stage}") % (2 ** 63)

    def canonical_dict(self) -> dict[str, Any]:
        """Everything that determines artifact content, for config hashing.

        Thread count is excluded: parallelism must never change results.
        """
        return {
            "seed": self.seed,
            "inputs": {k: str(v) for k, v in sorted(self.inputs.items())},
            "synth": dataclasses.asdict(self.synth),
            "kge": dataclasses.asdict(self.kge),
            "gatne": _tuples_to_lists(dataclasses.asdict(self.gatne)),
            "recall": dataclasses.asdict(self.recall),
            "ingest": dataclasses.asdict(self.ingest),
        }


def _default_input(name: str) -> str:
    return f"{name}.tsv" if name == "similarity" else f"{name}.jsonl"


def _tuples_to_lists(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _apply_section(target, section: dict, name: str, skip=("seed",),
                   tuple_fields=()) -> None:
    valid = {f.name for f in dataclasses.fields(target)} - set(skip)
    for key, value in section.items():
        if key not in valid:
            raise ConfigError(f"unknown key [{name}].{key}")
        if key in tuple_fields:
            if not isinstance(value, list):
                raise ConfigError(f"[{name}].{key} must be a list")
            value = tuple(value)
        current = getattr(target, key)
        if isinstance(current, bool) and not isinstance(value, bool):
            raise ConfigError(f"[{name}].{key} must be a boolean")
        if isinstance(current, int) and not isinstance(current, bool) \
                and isinstance(value, bool):
            raise ConfigError(f"[{name}].{key} must be a number")
        setattr(target, key, value)


def load_config(path: Path, seed: int | None = None,
                threads: str | int | None = None) -> PipelineConfig:
    """Parse a TOML config file, applying optional CLI overrides."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    config = PipelineConfig()
    known_sections = {"pipeline", "inputs", "synth", "kge", "gatne", "recall", "ingest"}
    unknown = set(raw) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    pipeline = raw.get("pipeline", {})
    for key, value in pipeline.items():
        if key == "workdir":
            config.workdir = Path(value)
        elif key == "seed":
            config.seed = int(value)
        elif key == "threads":
            config.threads = _parse_threads(value)
        else:
            raise ConfigError(f"unknown key [pipeline].{key}")

    config.inputs = {}
    for key, value in raw.get("inputs", {}).items():
        if key not in INPUT_NAMES:
            raise ConfigError(f"unknown key [inputs].{key}")
        config.inputs[key] = Path(value)
    for name in INPUT_NAMES:
        config.inputs.setdefault(name, config.workdir / "data" / _default_input(name))

    _apply_section(config.synth, raw.get("synth", {}), "synth")
    _apply_section(config.kge, raw.get("kge", {}), "kge")
    _apply_section(config.gatne, raw.get("gatne", {}), "gatne",
                   tuple_fields=("neighbor_samples", "shared_hidden"))
    _apply_section(config.recall, raw.get("recall", {}), "recall", skip=())
    _apply_section(config.ingest, raw.get("ingest", {}), "ingest", skip=())

    if seed is not None:
        config.seed = int(seed)
    if threads is not None:
        config.threads = _parse_threads(threads)
    config.validate()
    return config


def _parse_threads(value) -> int:
    if value in ("det", "deterministic"):
        return 1
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"threads must be an integer or 'det', got {value!r}") from None
    if n < 1:
        raise ConfigError("threads must be >= 1")
    return n
