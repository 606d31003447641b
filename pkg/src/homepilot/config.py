"""Application configuration and wiring.

Settings come from an optional YAML file, overridden by HOMEPILOT_* environment
variables; everything defaults to the packaged fixtures and the scripted
provider so a fresh checkout works with no setup.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from .gateway import CostLedger, HttpBackend, LlmGateway, Playbook, ScriptedBackend, load_pricing
from .memory import TaskMemory
from .pipeline import Agent, PipelineConfig
from .preferences import BinConfig, EffectMap, LogStore, PreferenceEngine, load_log_fixture
from .registry import load_corpus
from .simulator import load_environment


def fixture_path(*parts: str) -> Path:
    return Path(str(resources.files("homepilot").joinpath("fixtures", *parts)))


@dataclass(frozen=True)
class AppConfig:
    provider: str = "scripted"  # scripted | http
    base_url: str = ""
    api_key: str = ""
    model_id: str = "gpt-4o"
    embedding_model_id: str = ""
    corpus_dir: Path = field(default_factory=lambda: fixture_path("capabilities"))
    home_fixture: Path = field(default_factory=lambda: fixture_path("environments", "full.yaml"))
    playbook_path: Path = field(default_factory=lambda: fixture_path("playbook.yaml"))
    pricing_path: Path = field(default_factory=lambda: fixture_path("pricing.yaml"))
    effects_path: Path = field(default_factory=lambda: fixture_path("effects.yaml"))
    bins_path: Path = field(default_factory=lambda: fixture_path("bins.yaml"))
    logs_fixture: Path | None = field(default_factory=lambda: fixture_path("logs100.jsonl"))
    dataset_path: Path = field(default_factory=lambda: fixture_path("dataset.jsonl"))
    memory_path: Path | None = None
    logs_path: Path | None = None
    extraction_mode: str = "baseline"
    pipeline: PipelineConfig = PipelineConfig()

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "AppConfig":
        values: dict = {}
        if path:
            raw = yaml.safe_load(Path(path).read_text()) or {}
            values.update(raw)
        for key in (
            "provider",
            "base_url",
            "api_key",
            "model_id",
            "embedding_model_id",
            "extraction_mode",
        ):
            env = os.environ.get(f"HOMEPILOT_{key.upper()}")
            if env:
                values[key] = env
        values.update({k: v for k, v in overrides.items() if v is not None})
        path_keys = (
            "corpus_dir",
            "home_fixture",
            "playbook_path",
            "pricing_path",
            "effects_path",
            "bins_path",
            "logs_fixture",
            "dataset_path",
            "memory_path",
            "logs_path",
        )
        for key in path_keys:
            if key in values and values[key] is not None:
                values[key] = Path(values[key])
        pipeline_raw = values.pop("pipeline", None)
        cfg = cls(**values)
        if isinstance(pipeline_raw, dict):
            cfg = replace(cfg, pipeline=PipelineConfig(**pipeline_raw))
        elif isinstance(pipeline_raw, PipelineConfig):
            cfg = replace(cfg, pipeline=pipeline_raw)
        return cfg


def build_gateway(cfg: AppConfig) -> LlmGateway:
    ledger = CostLedger(load_pricing(cfg.pricing_path))
    if cfg.provider == "http":
        if not cfg.base_url:
            raise ValueError("http provider needs base_url")
        backend = HttpBackend(
            base_url=cfg.base_url,
            model_id=cfg.model_id,
            api_key=cfg.api_key,
            embedding_model_id=cfg.embedding_model_id,
        )
    elif cfg.provider == "scripted":
        backend = ScriptedBackend(Playbook.load(cfg.playbook_path))
    else:
        raise ValueError(f"unknown provider kind: {cfg.provider!r}")
    return LlmGateway(backend, ledger)


def build_agent(cfg: AppConfig) -> Agent:
    corpus = load_corpus(cfg.corpus_dir)
    home = load_environment(cfg.home_fixture, corpus)
    gateway = build_gateway(cfg)
    if cfg.memory_path and Path(cfg.memory_path).exists():
        memory = TaskMemory.restore(cfg.memory_path, gateway.embed)
    else:
        memory = TaskMemory(gateway.embed)
    store = LogStore(cfg.logs_path)
    if not store.entries and cfg.logs_fixture and Path(cfg.logs_fixture).exists():
        store.entries = load_log_fixture(cfg.logs_fixture)
    prefs = PreferenceEngine(
        EffectMap.load(cfg.effects_path),
        BinConfig.load(cfg.bins_path),
        corpus,
        gateway=gateway,
    )
    return Agent(
        corpus,
        home,
        gateway,
        memory,
        prefs,
        store,
        cfg.pipeline,
        memory_path=cfg.memory_path,
        extraction_mode=cfg.extraction_mode,
    )
