"""Declarative pipeline configuration.

One static key-value document (YAML or JSON) validated in full before any
stage runs. The RNG seed is mandatory — there is no wall-clock seeding — so
two runs with the same config produce identical generation artifacts.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from .errors import ConfigurationError
from .llm_client import ChatClient, LlmEndpoint
from .mocks import EchoConverter, GoldEchoModel, ScriptedModel, UuidModel, WrongConverter
from .tokenizer import HEURISTIC, TokenizerSpec, VOCAB_FILE, level_budget

BUILTIN_MINI_CORPUS = "builtin:mini-corpus"


@dataclass
class PipelineConfig:
    corpus_path: str
    output_dir: str
    seed: int
    levels: List[str] = field(default_factory=lambda: ["64K", "128K", "512K", "1M"])
    collections_per_level: int = 4
    random_to_traversal_ratio: float = 3.5
    templates_per_collection: int = 10
    stratified_templates: bool = False
    train_fraction: float = 0.8
    max_round_trip_attempts: int = 10
    tokenizer: TokenizerSpec = TokenizerSpec()
    converter: Dict[str, object] = field(default_factory=lambda: {"kind": "mock_echo"})
    evaluees: List[Dict[str, object]] = field(default_factory=list)
    eval_context_mode: str = "db_tables"
    eval_samples: int = 3
    eval_max_inflight: int = 4

    def resolve_corpus_path(self) -> Path:
        if self.corpus_path == BUILTIN_MINI_CORPUS:
            return Path(str(resources.files("corpusqa.data").joinpath("mini_corpus.jsonl")))
        return Path(self.corpus_path)


def _tokenizer_from(raw: Optional[dict]) -> TokenizerSpec:
    if not raw:
        return TokenizerSpec()
    kind = raw.get("kind", HEURISTIC)
    if kind == HEURISTIC:
        cpt = raw.get("chars_per_token", 4)
        if isinstance(cpt, str):
            cpt = Fraction(cpt)
        return TokenizerSpec(kind=HEURISTIC, chars_per_token=cpt)
    if kind == VOCAB_FILE:
        return TokenizerSpec(kind=VOCAB_FILE, vocab_path=raw.get("vocab_path"))
    raise ConfigurationError(f"unknown tokenizer kind {kind!r}")


_ENDPOINT_KINDS = ("http", "mock_echo", "mock_wrong", "mock_gold_echo", "mock_uuid", "mock_scripted")


def _check_endpoint(spec: dict, role: str) -> None:
    kind = spec.get("kind")
    if kind not in _ENDPOINT_KINDS:
        raise ConfigurationError(f"{role} endpoint kind must be one of {_ENDPOINT_KINDS}, got {kind!r}")
    if kind == "http":
        for key in ("base_url", "model"):
            if not spec.get(key):
                raise ConfigurationError(f"{role} http endpoint requires {key!r}")


def load_config(path) -> PipelineConfig:
    """Parse and fully validate a config document; fails fast on any problem."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    return validate_config(raw)


def validate_config(raw: dict) -> PipelineConfig:
    for key in ("corpus_path", "output_dir", "seed"):
        if key not in raw:
            raise ConfigurationError(f"config is missing required key {key!r}")
    if not isinstance(raw["seed"], int):
        raise ConfigurationError("seed must be an integer (wall-clock seeding is not supported)")

    cfg = PipelineConfig(
        corpus_path=str(raw["corpus_path"]),
        output_dir=str(raw["output_dir"]),
        seed=raw["seed"],
        levels=[str(l) for l in raw.get("levels", ["64K", "128K", "512K", "1M"])],
        collections_per_level=int(raw.get("collections_per_level", 4)),
        random_to_traversal_ratio=float(raw.get("random_to_traversal_ratio", 3.5)),
        templates_per_collection=int(raw.get("templates_per_collection", 10)),
        stratified_templates=bool(raw.get("stratified_templates", False)),
        train_fraction=float(raw.get("train_fraction", 0.8)),
        max_round_trip_attempts=int(raw.get("max_round_trip_attempts", 10)),
        tokenizer=_tokenizer_from(raw.get("tokenizer")),
        converter=dict(raw.get("converter", {"kind": "mock_echo"})),
        evaluees=[dict(e) for e in raw.get("evaluees", [])],
        eval_context_mode=str(raw.get("eval", {}).get("context_mode", "db_tables")),
        eval_samples=int(raw.get("eval", {}).get("samples_per_question", 3)),
        eval_max_inflight=int(raw.get("eval", {}).get("max_inflight", 4)),
    )

    if not cfg.resolve_corpus_path().exists():
        raise ConfigurationError(f"corpus path does not exist: {cfg.corpus_path}")
    for level in cfg.levels:
        level_budget(level)
    if not 0.0 <= cfg.train_fraction <= 1.0:
        raise ConfigurationError("train_fraction must be in [0, 1]")
    if cfg.collections_per_level < 1 or cfg.templates_per_collection < 1:
        raise ConfigurationError("collections_per_level and templates_per_collection must be >= 1")
    if cfg.eval_context_mode not in ("db_tables", "full_text"):
        raise ConfigurationError("eval.context_mode must be db_tables or full_text")
    if cfg.eval_samples < 1:
        raise ConfigurationError("eval.samples_per_question must be >= 1")
    _check_endpoint(cfg.converter, "converter")
    for spec in cfg.evaluees:
        _check_endpoint(spec, "evaluee")
    return cfg


def _http_endpoint(spec: dict) -> LlmEndpoint:
    return LlmEndpoint(
        base_url=spec["base_url"],
        model=spec["model"],
        api_key_env=spec.get("api_key_env", "LLM_API_KEY"),
        temperature=float(spec.get("temperature", 0.7)),
        max_tokens=int(spec.get("max_tokens", 1024)),
        timeout=float(spec.get("timeout", 120.0)),
        max_retries=int(spec.get("max_retries", 3)),
        context_window=spec.get("context_window"),
    )


def build_converter_backend(spec: dict):
    kind = spec.get("kind")
    if kind == "mock_echo":
        return EchoConverter()
    if kind == "mock_wrong":
        return WrongConverter()
    if kind == "http":
        return ChatClient(_http_endpoint(spec))
    raise ConfigurationError(f"unsupported converter kind {kind!r}")


def build_eval_backend(spec: dict, instances: Sequence, rng: random.Random):
    kind = spec.get("kind")
    if kind == "mock_gold_echo":
        return GoldEchoModel(instances)
    if kind == "mock_uuid":
        return UuidModel(random.Random(rng.getrandbits(64)))
    if kind == "mock_scripted":
        return ScriptedModel([str(a) for a in spec.get("answers", ["NULL"])])
    if kind == "http":
        return ChatClient(_http_endpoint(spec))
    raise ConfigurationError(f"unsupported evaluee kind {kind!r}")


def evaluee_name(spec: dict) -> str:
    return str(spec.get("name") or spec.get("model") or spec.get("kind"))
