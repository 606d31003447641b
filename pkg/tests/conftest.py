from __future__ import annotations

from pathlib import Path

import pytest

from homepilot.config import fixture_path
from homepilot.gateway import CostLedger, LlmGateway, Playbook, ScriptedBackend, load_pricing
from homepilot.memory import TaskMemory
from homepilot.pipeline import Agent, PipelineConfig
from homepilot.preferences import BinConfig, EffectMap, LogStore, PreferenceEngine, load_log_fixture
from homepilot.registry import load_corpus
from homepilot.simulator import load_environment

FIXTURES = Path(str(fixture_path()))


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(FIXTURES / "capabilities")


@pytest.fixture(scope="session")
def playbook():
    return Playbook.load(FIXTURES / "playbook.yaml")


@pytest.fixture(scope="session")
def pricing():
    return load_pricing(FIXTURES / "pricing.yaml")


@pytest.fixture(scope="session")
def effect_map():
    return EffectMap.load(FIXTURES / "effects.yaml")


@pytest.fixture(scope="session")
def bin_config():
    return BinConfig.load(FIXTURES / "bins.yaml")


@pytest.fixture(scope="session")
def log_fixture_entries():
    return load_log_fixture(FIXTURES / "logs100.jsonl")


@pytest.fixture
def full_home(corpus):
    return load_environment(FIXTURES / "environments" / "full.yaml", corpus)


@pytest.fixture
def base_home(corpus):
    return load_environment(FIXTURES / "environments" / "base.yaml", corpus)


@pytest.fixture
def new_home(corpus):
    return load_environment(FIXTURES / "environments" / "new.yaml", corpus)


@pytest.fixture
def gateway(playbook, pricing):
    return LlmGateway(ScriptedBackend(playbook), CostLedger(pricing))


@pytest.fixture
def make_agent(corpus, playbook, pricing, effect_map, bin_config, log_fixture_entries):
    """Factory: a fresh agent over the FULL environment, seeded with the
    100-entry interaction log fixture."""

    def factory(config: PipelineConfig | None = None, seed_logs: bool = True, home=None):
        gateway = LlmGateway(ScriptedBackend(playbook), CostLedger(pricing))
        state = home or load_environment(FIXTURES / "environments" / "full.yaml", corpus)
        store = LogStore()
        if seed_logs:
            store.entries = list(log_fixture_entries)
        prefs = PreferenceEngine(effect_map, bin_config, corpus, gateway=gateway)
        return Agent(
            corpus,
            state,
            gateway,
            TaskMemory(gateway.embed),
            prefs,
            store,
            config or PipelineConfig(),
        )

    return factory


@pytest.fixture
def agent(make_agent):
    return make_agent()
