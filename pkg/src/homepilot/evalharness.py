"""Desk-scale evaluation harness: dataset loading, cold/warm experiments,
ground-truth matching (STR/ECR/ICR/SER), latency and cost accounting, and
ablation variants (decomposition off, memory off).

Matching works on (device, capability, command) triples with parameters
ignored. Extra commands are reported two ways: the lenient success rate keeps
tasks whose extras are additions on top of a fully covered ground truth, the
strict one does not.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .domain import DeviceCommand, InstructionType, ProposalStatus
from .gateway import CostLedger, LlmGateway, Playbook, ScriptedBackend, load_pricing
from .memory import TaskMemory
from .pipeline import Agent, PipelineConfig
from .preferences import BinConfig, EffectMap, LogStore, PreferenceEngine, load_log_fixture
from .registry import SchemaCorpus, load_corpus, validate_command
from .simulator import HomeState, load_environment

Triple = tuple[str, str, str]


class MissingMemorySnapshot(FileNotFoundError):
    pass


@dataclass(frozen=True)
class DatasetTask:
    task_id: str
    instruction_text: str
    rephrased_text: str | None
    instruction_type: InstructionType
    ground_truth: tuple[Triple, ...]

    def __post_init__(self):
        if self.instruction_type is not InstructionType.DEVICE_QUERY and not self.ground_truth:
            raise ValueError(f"{self.task_id}: non-query tasks need ground truth")


def load_dataset(path: str | Path) -> list[DatasetTask]:
    tasks = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        tasks.append(
            DatasetTask(
                task_id=raw["task_id"],
                instruction_text=raw["instruction"],
                rephrased_text=raw.get("rephrased"),
                instruction_type=InstructionType.from_wire(raw["type"]),
                ground_truth=tuple(tuple(t) for t in raw["ground_truth"]),
            )
        )
    return tasks


@dataclass
class EvalRecord:
    task_id: str
    generated: tuple[Triple, ...]
    success: bool  # lenient: extras do not negate success
    success_strict: bool
    excessive: bool
    insufficient: bool
    syntax_error: bool
    latency_ms: float
    cost_usd: Fraction
    provider_calls: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if self.success and self.insufficient:
            raise ValueError("success and insufficient are mutually exclusive")

    @property
    def total_calls(self) -> int:
        return sum(n for _, n in self.provider_calls)


def score_flags(
    generated: list[DeviceCommand],
    ground_truth: tuple[Triple, ...],
    env,
    corpus: SchemaCorpus,
) -> dict:
    """STR/ECR/ICR/SER flags for one task's generated commands."""
    gen_triples = tuple(c.triple for c in generated)
    gen_set, gt_set = set(gen_triples), set(ground_truth)
    insufficient = not gt_set.issubset(gen_set)
    excessive = bool(gen_set - gt_set)
    syntax_error = False
    gt_commands_ok = True
    for command in generated:
        ok = validate_command(command, env, corpus).ok
        if not ok:
            syntax_error = True
            if command.triple in gt_set:
                gt_commands_ok = False
    success = (not insufficient) and gt_commands_ok
    return {
        "generated": gen_triples,
        "success": success,
        "success_strict": success and not excessive,
        "excessive": excessive,
        "insufficient": insufficient,
        "syntax_error": syntax_error,
    }


@dataclass(frozen=True)
class HarnessConfig:
    corpus_dir: Path
    env_fixture: Path
    playbook_path: Path
    pricing_path: Path
    effects_path: Path
    bins_path: Path
    logs_fixture: Path | None
    memory_snapshot: Path
    ablation: str = "full"  # full | nodecomp | nomem
    pipeline: PipelineConfig = PipelineConfig()

    def __post_init__(self):
        if self.ablation not in ("full", "nodecomp", "nomem"):
            raise ValueError(f"unknown ablation mode: {self.ablation!r}")


def ablation_modes(base: PipelineConfig) -> dict[str, PipelineConfig]:
    return {
        "full": replace(base, memory_enabled=True, decompose_enabled=True),
        "nodecomp": replace(base, memory_enabled=True, decompose_enabled=False),
        "nomem": replace(base, memory_enabled=False, decompose_enabled=True),
    }


def _build_agent(cfg: HarnessConfig, memory: TaskMemory, gateway: LlmGateway) -> Agent:
    corpus = load_corpus(cfg.corpus_dir)
    home = load_environment(cfg.env_fixture, corpus)
    store = LogStore()
    if cfg.logs_fixture:
        store.entries = load_log_fixture(cfg.logs_fixture)
    prefs = PreferenceEngine(
        EffectMap.load(cfg.effects_path), BinConfig.load(cfg.bins_path), corpus
    )
    pipeline_cfg = ablation_modes(cfg.pipeline)[cfg.ablation]
    return Agent(corpus, home, gateway, memory, prefs, store, pipeline_cfg)


@dataclass
class ExperimentResult:
    mode: str
    ablation: str
    records: list[EvalRecord]
    total_calls: int
    total_cost: Fraction


def run_experiment(
    dataset: list[DatasetTask], mode: str, cfg: HarnessConfig
) -> ExperimentResult:
    """Process the dataset sequentially; tasks reuse memory as it accumulates.

    Cold starts empty and persists a memory snapshot; Warm restores it and
    processes rephrased instructions where available. User-feedback steps are
    disabled: every reviewable proposal is approved as-is.
    """
    if mode not in ("cold", "warm"):
        raise ValueError(f"unknown mode: {mode!r}")
    gateway = LlmGateway(
        ScriptedBackend(Playbook.load(cfg.playbook_path)),
        CostLedger(load_pricing(cfg.pricing_path)),
    )
    if mode == "warm" and cfg.ablation != "nomem":
        if not Path(cfg.memory_snapshot).exists():
            raise MissingMemorySnapshot(
                f"warm run needs a memory snapshot at {cfg.memory_snapshot}; run cold first"
            )
        memory = TaskMemory.restore(cfg.memory_snapshot, gateway.embed)
    else:
        memory = TaskMemory(gateway.embed)
    agent = _build_agent(cfg, memory, gateway)

    records: list[EvalRecord] = []
    for task in dataset:
        text = task.instruction_text
        if mode == "warm" and task.rephrased_text:
            text = task.rephrased_text
        started = time.perf_counter()
        result = agent.run_instruction(text)
        proposal = result.proposal
        if proposal.status is ProposalStatus.AWAITING_REVIEW:
            proposal, _ = agent.approve(proposal)
        latency_ms = (time.perf_counter() - started) * 1000.0
        generated: list[DeviceCommand] = []
        if proposal.status is ProposalStatus.APPROVED:
            generated = [c for s in proposal.action_subtasks() for c in s.commands]
        flags = score_flags(generated, task.ground_truth, agent.home.descriptors(), agent.corpus)
        records.append(
            EvalRecord(
                task_id=task.task_id,
                latency_ms=latency_ms,
                cost_usd=result.session.session_cost(),
                provider_calls=tuple(proposal.call_trace),
                **flags,
            )
        )
    if mode == "cold" and cfg.ablation != "nomem":
        memory.persist(cfg.memory_snapshot)
    totals_in, totals_out = gateway.ledger.total_tokens()
    del totals_in, totals_out
    return ExperimentResult(
        mode=mode,
        ablation=cfg.ablation,
        records=sorted(records, key=lambda r: r.task_id),
        total_calls=sum(r.total_calls for r in records),
        total_cost=gateway.ledger.total_cost(),
    )


def aggregate(records: list[EvalRecord]) -> dict:
    """Rates as percentages plus mean latency/cost/calls; safe when empty."""
    n = len(records)
    if n == 0:
        return {
            "tasks": 0,
            "str_lenient_pct": 0.0,
            "str_strict_pct": 0.0,
            "ecr_pct": 0.0,
            "icr_pct": 0.0,
            "ser_pct": 0.0,
            "latency_ms_mean": 0.0,
            "cost_usd_mean": Fraction(0),
            "provider_calls_mean": 0.0,
        }

    def pct(flag):
        return round(100.0 * sum(1 for r in records if getattr(r, flag)) / n, 2)

    return {
        "tasks": n,
        "str_lenient_pct": pct("success"),
        "str_strict_pct": pct("success_strict"),
        "ecr_pct": pct("excessive"),
        "icr_pct": pct("insufficient"),
        "ser_pct": pct("syntax_error"),
        "latency_ms_mean": sum(r.latency_ms for r in records) / n,
        "cost_usd_mean": sum((r.cost_usd for r in records), Fraction(0)) / n,
        "provider_calls_mean": sum(r.total_calls for r in records) / n,
    }
