"""Command-line entry points: serve, one-shot run, evaluation, memory export."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, build_agent
from .domain import ProposalStatus, proposal_to_json
from .evalharness import HarnessConfig, load_dataset, run_experiment
from .memory import TaskMemory
from .pipeline import PipelineConfig
from .reporting import emit_report


def _config(config_file, **overrides) -> AppConfig:
    return AppConfig.load(config_file, **overrides)


@click.group()
def main():
    """Smart-home agent: pipeline, simulator, memory, and evaluation."""


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--home", "home_fixture", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--playbook", "playbook_path", type=click.Path(exists=True), default=None)
@click.option("--memory", "memory_path", type=click.Path(), default=None)
def serve(port, host, config_file, home_fixture, corpus_dir, playbook_path, memory_path):
    """Run the HTTP service for the review console."""
    import uvicorn

    from .service import create_app

    cfg = _config(
        config_file,
        home_fixture=home_fixture,
        corpus_dir=corpus_dir,
        playbook_path=playbook_path,
        memory_path=memory_path,
    )
    uvicorn.run(create_app(config=cfg), host=host, port=port, log_level="warning")


@main.command()
@click.argument("instruction")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--approve/--no-approve", default=True, show_default=True,
              help="Approve the proposal and execute it in the virtual home.")
def run(instruction, config_file, approve):
    """One-shot pipeline run; prints the proposal JSON to stdout."""
    agent = build_agent(_config(config_file))
    result = agent.run_instruction(instruction)
    proposal = result.proposal
    answers = []
    if approve and proposal.status is ProposalStatus.AWAITING_REVIEW:
        proposal, answers = agent.approve(proposal)
    doc = json.loads(proposal_to_json(proposal))
    doc["answers"] = [list(a) for a in answers]
    click.echo(json.dumps(doc, indent=2))
    if proposal.status is ProposalStatus.FAILED:
        sys.exit(1)


@main.group()
def eval():
    """Evaluation harness."""


@eval.command(name="run")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(["cold", "warm"]), default="cold", show_default=True)
@click.option("--ablation", type=click.Choice(["full", "nodecomp", "nomem"]),
              default="full", show_default=True)
@click.option("--provider", type=click.Choice(["scripted", "http"]), default="scripted",
              show_default=True)
@click.option("--report", "report_dir", type=click.Path(), default=None,
              help="Directory for report JSON/CSV/figures.")
@click.option("--snapshot", "snapshot_path", type=click.Path(), default="memory-snapshot.json",
              show_default=True, help="Memory snapshot persisted by cold, read by warm.")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table",
              show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
def eval_run(dataset_path, mode, ablation, provider, report_dir, snapshot_path, fmt, config_file):
    """Run the dataset cold or warm and print the aggregate report."""
    app_cfg = _config(config_file, provider=provider)
    cfg = HarnessConfig(
        corpus_dir=app_cfg.corpus_dir,
        env_fixture=app_cfg.home_fixture,
        playbook_path=app_cfg.playbook_path,
        pricing_path=app_cfg.pricing_path,
        effects_path=app_cfg.effects_path,
        bins_path=app_cfg.bins_path,
        logs_fixture=app_cfg.logs_fixture,
        memory_snapshot=Path(snapshot_path),
        ablation=ablation,
        pipeline=app_cfg.pipeline,
    )
    dataset = load_dataset(dataset_path or app_cfg.dataset_path)
    result = run_experiment(dataset, mode, cfg)
    click.echo(emit_report(result, fmt=fmt, out_dir=report_dir), nl=False)


@main.group()
def memory():
    """Task memory snapshots."""


@memory.command()
@click.argument("path", type=click.Path())
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
def export(path, config_file):
    """Write the configured memory snapshot to PATH."""
    agent = build_agent(_config(config_file))
    agent.memory.persist(path)
    click.echo(f"exported {agent.memory.counts()} to {path}")


@memory.command(name="import")
@click.argument("path", type=click.Path(exists=True))
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--memory", "memory_path", type=click.Path(), required=True,
              help="Destination snapshot the service/config points at.")
def import_(path, config_file, memory_path):
    """Validate PATH and install it as the configured memory snapshot."""
    from .gateway import deterministic_embedding

    restored = TaskMemory.restore(path, deterministic_embedding)
    restored.persist(memory_path)
    click.echo(f"imported {restored.counts()} into {memory_path}")


if __name__ == "__main__":
    main()
