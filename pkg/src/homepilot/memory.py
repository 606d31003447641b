"""Hierarchical task memory: task -> subtask -> context, a three-level DAG.

Tasks and subtasks are matched by embedding cosine similarity (linear scan;
desk-scale graphs make exactness cheap), contexts by exact keyword. Subtask
nodes hold command templates whose parameter values are abstracted to named
slots; context nodes hold the per-context bindings that re-concretize them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .domain import (
    CommandArg,
    DeviceCommand,
    ParamValue,
    Provenance,
    Subtask,
    TaskProposal,
    TriggerPredicate,
    subtask_from_envelope,
    _command_from_envelope,
    _command_to_envelope,
)

SNAPSHOT_VERSION = 1


class RestoreError(ValueError):
    pass


@dataclass
class TaskNode:
    node_id: int
    instruction_text: str
    embedding: np.ndarray
    subtask_ids: list[int] = field(default_factory=list)


@dataclass
class SubtaskNode:
    node_id: int
    description_text: str
    embedding: np.ndarray
    device_name: str
    role: str = "action"
    command_template: tuple[DeviceCommand, ...] = ()
    predicates: tuple[TriggerPredicate, ...] = ()
    context_ids: list[int] = field(default_factory=list)
    task_ids: list[int] = field(default_factory=list)


@dataclass
class ContextNode:
    node_id: int
    context_keyword: str
    bindings: dict[str, ParamValue] = field(default_factory=dict)


@dataclass(frozen=True)
class GraphDelta:
    task_id: int
    created_task: bool
    subtask_ids: tuple[int, ...]
    created_subtasks: tuple[int, ...]
    context_ids: tuple[int, ...]


def normalize_keyword(keyword: str) -> str:
    return keyword.strip().lower()


def abstract_template(
    commands: tuple[DeviceCommand, ...],
) -> tuple[tuple[DeviceCommand, ...], dict[str, ParamValue]]:
    """Replace every named concrete argument with a [<name>_value] slot.

    Commands without arguments (the on/off/lock style, where the value is
    implied by the command itself) pass through unchanged. Returns the
    template plus the extracted bindings; instantiate() is the inverse.
    """
    bindings: dict[str, ParamValue] = {}
    template = []
    for cmd in commands:
        new_args = []
        for arg in cmd.arguments:
            if arg.value.is_placeholder:
                new_args.append(arg)
                continue
            base = arg.name or arg.value.kind
            slot = f"{base}_value"
            suffix = 2
            while slot in bindings:
                slot = f"{base}_value_{suffix}"
                suffix += 1
            bindings[slot] = arg.value
            new_args.append(
                CommandArg(arg.name, ParamValue.placeholder(arg.value.kind, slot))
            )
        template.append(replace(cmd, arguments=tuple(new_args)))
    return tuple(template), bindings


def instantiate(
    template: tuple[DeviceCommand, ...], bindings: dict[str, ParamValue]
) -> tuple[DeviceCommand, ...]:
    """Fill template slots from bindings; unbound slots stay abstract."""
    commands = []
    for cmd in template:
        new_args = []
        for arg in cmd.arguments:
            slot = arg.value.slot
            if slot is not None and slot in bindings:
                new_args.append(CommandArg(arg.name, bindings[slot]))
            else:
                new_args.append(arg)
        commands.append(replace(cmd, arguments=tuple(new_args)))
    return tuple(commands)


class TaskMemory:
    def __init__(self, embed_fn):
        self.embed_fn = embed_fn
        self.tasks: dict[int, TaskNode] = {}
        self.subtasks: dict[int, SubtaskNode] = {}
        self.contexts: dict[int, ContextNode] = {}
        self._counter = 0

    def _next_id(self) -> int:
        self._counter += 1
        return self._counter

    def counts(self) -> dict[str, int]:
        return {
            "tasks": len(self.tasks),
            "subtasks": len(self.subtasks),
            "contexts": len(self.contexts),
        }

    # -- matching -------------------------------------------------------------

    @staticmethod
    def _best(nodes, query: np.ndarray, tau: float):
        best = None
        best_sim = -1.0
        for node in sorted(nodes, key=lambda n: n.node_id):
            sim = float(np.dot(query, node.embedding))
            if sim > best_sim:  # strict: oldest node wins ties
                best, best_sim = node, sim
        if best is not None and best_sim >= tau:
            return best
        return None

    def match_task(self, instruction_text: str, tau_task: float) -> TaskNode | None:
        if not self.tasks:
            return None
        return self._best(self.tasks.values(), self.embed_fn(instruction_text), tau_task)

    def match_subtask(
        self, description: str, device_name: str, tau_subtask: float
    ) -> SubtaskNode | None:
        candidates = [s for s in self.subtasks.values() if s.device_name == device_name]
        if not candidates:
            return None
        return self._best(candidates, self.embed_fn(description), tau_subtask)

    def match_context(self, subtask_node: SubtaskNode, context_keyword: str) -> ContextNode | None:
        wanted = normalize_keyword(context_keyword)
        for cid in subtask_node.context_ids:
            node = self.contexts[cid]
            if node.context_keyword == wanted:
                return node
        return None

    # -- writes ---------------------------------------------------------------

    def add_task_node(self, instruction_text: str, embedding: np.ndarray | None = None) -> TaskNode:
        node = TaskNode(
            node_id=self._next_id(),
            instruction_text=instruction_text,
            embedding=embedding if embedding is not None else self.embed_fn(instruction_text),
        )
        self.tasks[node.node_id] = node
        return node

    def upsert_subtask(
        self, task_node: TaskNode, subtask: Subtask, tau_subtask: float
    ) -> SubtaskNode:
        """Merge into an existing node (same device, similar text) or create one."""
        existing = self.match_subtask(subtask.description, subtask.device_name, tau_subtask)
        if existing is None:
            template, _ = abstract_template(subtask.commands)
            existing = SubtaskNode(
                node_id=self._next_id(),
                description_text=subtask.description,
                embedding=self.embed_fn(subtask.description),
                device_name=subtask.device_name,
                role=subtask.role,
                command_template=template,
                predicates=subtask.predicates,
            )
            self.subtasks[existing.node_id] = existing
        if task_node.node_id not in existing.task_ids:
            existing.task_ids.append(task_node.node_id)
        if existing.node_id not in task_node.subtask_ids:
            task_node.subtask_ids.append(existing.node_id)
        return existing

    def upsert_context(
        self, subtask_node: SubtaskNode, context_keyword: str, bindings: dict[str, ParamValue]
    ) -> ContextNode:
        node = self.match_context(subtask_node, context_keyword)
        if node is None:
            node = ContextNode(
                node_id=self._next_id(),
                context_keyword=normalize_keyword(context_keyword),
            )
            self.contexts[node.node_id] = node
            subtask_node.context_ids.append(node.node_id)
        node.bindings = dict(bindings)
        return node

    def commit_proposal(
        self, proposal: TaskProposal, tau_task: float, tau_subtask: float
    ) -> GraphDelta:
        """Store an approved proposal; queries carry no reusable commands."""
        task_node = self.match_task(proposal.instruction_text, tau_task)
        created_task = task_node is None
        if task_node is None:
            task_node = self.add_task_node(proposal.instruction_text)
        subtask_ids: list[int] = []
        created: list[int] = []
        context_ids: list[int] = []
        before = set(self.subtasks)
        for subtask in proposal.subtasks:
            if subtask.role == "query":
                continue
            node = self.upsert_subtask(task_node, subtask, tau_subtask)
            subtask_ids.append(node.node_id)
            if node.node_id not in before:
                created.append(node.node_id)
            _, bindings = abstract_template(subtask.commands)
            context = self.upsert_context(node, proposal.context_keyword or "normal", bindings)
            context_ids.append(context.node_id)
        return GraphDelta(
            task_id=task_node.node_id,
            created_task=created_task,
            subtask_ids=tuple(subtask_ids),
            created_subtasks=tuple(created),
            context_ids=tuple(context_ids),
        )

    # -- persistence ------------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "counter": self._counter,
            "tasks": [
                {
                    "id": t.node_id,
                    "instruction": t.instruction_text,
                    "embedding": t.embedding.tolist(),
                    "subtasks": list(t.subtask_ids),
                }
                for t in self.tasks.values()
            ],
            "subtasks": [
                {
                    "id": s.node_id,
                    "description": s.description_text,
                    "embedding": s.embedding.tolist(),
                    "device": s.device_name,
                    "role": s.role,
                    "commands": [_command_to_envelope(c) for c in s.command_template],
                    "triggers": [p.to_wire() for p in s.predicates],
                    "contexts": list(s.context_ids),
                    "tasks": list(s.task_ids),
                }
                for s in self.subtasks.values()
            ],
            "contexts": [
                {
                    "id": c.node_id,
                    "keyword": c.context_keyword,
                    "bindings": {
                        slot: {"kind": v.kind, "value": v.payload}
                        for slot, v in c.bindings.items()
                    },
                }
                for c in self.contexts.values()
            ],
        }

    def persist(self, path: str | Path) -> None:
        """Atomic snapshot: write-temp-then-rename."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(target.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_snapshot()))
        os.replace(tmp, target)

    @classmethod
    def restore(cls, path: str | Path, embed_fn) -> "TaskMemory":
        try:
            raw = json.loads(Path(path).read_text())
            if raw.get("version") != SNAPSHOT_VERSION:
                raise RestoreError(f"unsupported snapshot version: {raw.get('version')}")
            memory = cls(embed_fn)
            memory._counter = raw["counter"]
            for t in raw["tasks"]:
                memory.tasks[t["id"]] = TaskNode(
                    node_id=t["id"],
                    instruction_text=t["instruction"],
                    embedding=np.asarray(t["embedding"], dtype=np.float64),
                    subtask_ids=list(t["subtasks"]),
                )
            for s in raw["subtasks"]:
                memory.subtasks[s["id"]] = SubtaskNode(
                    node_id=s["id"],
                    description_text=s["description"],
                    embedding=np.asarray(s["embedding"], dtype=np.float64),
                    device_name=s["device"],
                    role=s["role"],
                    command_template=tuple(_command_from_envelope(c) for c in s["commands"]),
                    predicates=tuple(TriggerPredicate.from_wire(p) for p in s["triggers"]),
                    context_ids=list(s["contexts"]),
                    task_ids=list(s["tasks"]),
                )
            for c in raw["contexts"]:
                memory.contexts[c["id"]] = ContextNode(
                    node_id=c["id"],
                    context_keyword=c["keyword"],
                    bindings={
                        slot: ParamValue.concrete(v["kind"], v["value"])
                        for slot, v in c["bindings"].items()
                    },
                )
            return memory
        except RestoreError:
            raise
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise RestoreError(f"cannot restore snapshot from {path}: {exc}") from exc

    def export_graph(self) -> dict:
        """Console view: nodes plus edges, with task->subtask edge cosines as
        the similarity metadata."""
        return {
            "counts": self.counts(),
            "tasks": [
                {"id": t.node_id, "instruction": t.instruction_text, "subtasks": t.subtask_ids}
                for t in sorted(self.tasks.values(), key=lambda n: n.node_id)
            ],
            "subtasks": [
                {
                    "id": s.node_id,
                    "description": s.description_text,
                    "device": s.device_name,
                    "role": s.role,
                    "contexts": s.context_ids,
                    "tasks": s.task_ids,
                    "task_sims": {
                        str(tid): round(float(np.dot(s.embedding, self.tasks[tid].embedding)), 4)
                        for tid in s.task_ids
                        if tid in self.tasks
                    },
                    "template": [c.to_wire() for c in s.command_template],
                }
                for s in sorted(self.subtasks.values(), key=lambda n: n.node_id)
            ],
            "contexts": [
                {
                    "id": c.node_id,
                    "keyword": c.context_keyword,
                    "bindings": {slot: v.payload for slot, v in c.bindings.items()},
                }
                for c in sorted(self.contexts.values(), key=lambda n: n.node_id)
            ],
        }
