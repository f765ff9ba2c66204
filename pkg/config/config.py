#!/usr/bin/env python3
"""
Configuration management for PullNet
Handles environment settings and the JSON run configuration
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

from dotenv import load_dotenv

load_dotenv()

MODES = ("kb_only", "text_only", "hybrid")


class Config:
    """Process-wide settings read from the environment"""

    # Logging
    LOG_LEVEL = os.getenv("PULLNET_LOG_LEVEL", "INFO").upper()
    PROGRESS = os.getenv("PULLNET_PROGRESS", "true").lower() == "true"

    # Run directories
    RUNS_DIR = os.getenv("PULLNET_RUNS_DIR", "runs")
    CHECKPOINT_NAME = os.getenv("PULLNET_CHECKPOINT_NAME", "model.ckpt")

    # Evaluation parallelism
    DEFAULT_JOBS = int(os.getenv("PULLNET_JOBS", "1"))

    # Error codes
    class ErrorCodes:
        DATA_VALIDATION_ERROR = "DATA001"
        DUPLICATE_TRIPLE = "KB001"
        UNKNOWN_KEY = "KEY001"
        CONFIG_ERROR = "CFG001"
        CHECKPOINT_ERROR = "CKPT001"
        TRAINING_DIVERGED = "TRAIN001"
        GRAPH_ERROR = "GRAPH001"

    # Exit codes
    class ExitCodes:
        OK = 0
        USAGE_ERROR = 1
        RUNTIME_ERROR = 2


def _fail(message: str):
    # Late import keeps config importable from src.errors
    from src.errors import ConfigError

    raise ConfigError(message)


@dataclass(frozen=True)
class ModelConfig:
    """Hidden size, graph-convolution depth and init seed"""

    n: int = 32
    L: int = 3
    seed: int = 0

    def validate(self) -> "ModelConfig":
        if self.n < 1:
            _fail(f"n must be >= 1, got {self.n}")
        if self.L < 0:
            _fail(f"L must be >= 0, got {self.L}")
        return self


@dataclass(frozen=True)
class EngineConfig:
    """Iterative retrieval settings"""

    T: int = 2
    k: int = 2
    N_d: int = 10
    N_f: int = 20
    epsilon: float = 0.5
    mode: str = "kb_only"

    def validate(self) -> "EngineConfig":
        if self.T < 1:
            _fail(f"T must be >= 1, got {self.T}")
        if self.k < 1:
            _fail(f"k must be >= 1, got {self.k}")
        if self.N_d < 0 or self.N_f < 0:
            _fail(f"retrieval budgets must be >= 0, got N_d={self.N_d} N_f={self.N_f}")
        if not 0.0 <= self.epsilon <= 1.0:
            _fail(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.mode not in MODES:
            _fail(f"mode must be one of {MODES}, got {self.mode!r}")
        return self

    @property
    def uses_kb(self) -> bool:
        return self.mode in ("kb_only", "hybrid")

    @property
    def uses_text(self) -> bool:
        return self.mode in ("text_only", "hybrid")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and training-loop settings"""

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    checkpoint_interval: int = 1
    training_recall_interval: int = 0

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            _fail(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.adam_beta1 < 1.0 or not 0.0 <= self.adam_beta2 < 1.0:
            _fail("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            _fail(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.weight_decay < 0:
            _fail(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            _fail(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            _fail(f"epochs must be >= 0, got {self.epochs}")
        if self.checkpoint_interval < 1:
            _fail(f"checkpoint_interval must be >= 1, got {self.checkpoint_interval}")
        if self.training_recall_interval < 0:
            _fail("training_recall_interval must be >= 0")
        return self


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the pull, relation and answer BCE terms"""

    pull: float = 1.0
    relation: float = 1.0
    answer: float = 1.0

    def validate(self) -> "LossWeights":
        if min(self.pull, self.relation, self.answer) < 0:
            _fail("loss weights must be >= 0")
        if self.pull + self.relation + self.answer <= 0:
            _fail("at least one loss weight must be positive")
        return self


@dataclass(frozen=True)
class PprConfig:
    """PageRank-Nibble baseline retriever settings"""

    alpha: float = 0.15
    epsilon_ppr: float = 1e-6
    m: int = 500
    k_hops: int = 3

    def validate(self) -> "PprConfig":
        if not 0.0 < self.alpha < 1.0:
            _fail(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon_ppr <= 0:
            _fail(f"epsilon_ppr must be > 0, got {self.epsilon_ppr}")
        if self.m < 1:
            _fail(f"m must be >= 1, got {self.m}")
        if self.k_hops < 0:
            _fail(f"k_hops must be >= 0, got {self.k_hops}")
        return self


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic movie-KB dataset settings"""

    n_entities: int = 2000
    n_relations: int = 6
    n_facts: int = 10000
    hops: int = 3
    n_questions: int = 2000
    corpus_coverage: float = 1.0
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if not 0.0 <= self.corpus_coverage <= 1.0:
            _fail(f"corpus_coverage must lie in [0, 1], got {self.corpus_coverage}")
        if not 1 <= self.hops <= 3:
            _fail(f"hops must lie in 1..3, got {self.hops}")
        if self.n_entities < 2 or self.n_relations < 1 or self.n_facts < 1:
            _fail("synthetic KB needs >= 2 entities, >= 1 relation and >= 1 fact")
        if self.n_questions < 0:
            _fail("n_questions must be >= 0")
        return self


_SECTIONS = {
    "train": TrainConfig,
    "ppr": PprConfig,
    "synth": SynthConfig,
    "loss_weights": LossWeights,
}
_ENGINE_KEYS = ("T", "k", "N_d", "N_f", "epsilon", "mode")
_MODEL_KEYS = ("n", "L", "seed")


def _build_section(cls, values: Dict[str, Any], name: str):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(values) - allowed
    if unknown:
        _fail(f"unknown keys in '{name}': {sorted(unknown)}")
    try:
        return cls(**values).validate()
    except TypeError as exc:
        _fail(f"invalid '{name}' section: {exc}")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, parsed from one JSON file"""

    model: ModelConfig = field(default_factory=ModelConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ppr: PprConfig = field(default_factory=PprConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    # engine keys the config file set explicitly
    engine_keys: Tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        if not isinstance(raw, dict):
            _fail("run config must be a JSON object")
        known = set(_ENGINE_KEYS) | set(_MODEL_KEYS) | set(_SECTIONS)
        unknown = set(raw) - known
        if unknown:
            _fail(f"unknown config keys: {sorted(unknown)}")

        engine = _build_section(
            EngineConfig, {k: raw[k] for k in _ENGINE_KEYS if k in raw}, "engine"
        )
        model = _build_section(ModelConfig, {k: raw[k] for k in _MODEL_KEYS if k in raw}, "model")
        sections = {}
        for name, section_cls in _SECTIONS.items():
            values = raw.get(name, {})
            if not isinstance(values, dict):
                _fail(f"'{name}' must be a JSON object")
            if name in ("train", "synth") and "seed" not in values:
                values = {**values, "seed": model.seed}
            sections[name] = _build_section(section_cls, values, name)
        engine_keys = tuple(k for k in _ENGINE_KEYS if k in raw)
        return cls(model=model, engine=engine, engine_keys=engine_keys, **sections)

    @classmethod
    def from_file(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        try:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            _fail(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            _fail(f"config file {path} is not valid JSON: {exc}")
        return cls.from_dict(raw)

    def to_dict(self) -> Dict[str, Any]:
        flat: Dict[str, Any] = {**asdict(self.engine), **asdict(self.model)}
        for name in _SECTIONS:
            flat[name] = asdict(getattr(self, name))
        return flat

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_engine(self, **changes) -> "RunConfig":
        engine = EngineConfig(**{**asdict(self.engine), **changes}).validate()
        return RunConfig(
            model=self.model,
            engine=engine,
            train=self.train,
            ppr=self.ppr,
            synth=self.synth,
            loss_weights=self.loss_weights,
            engine_keys=self.engine_keys,
        )
