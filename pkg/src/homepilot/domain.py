"""Shared vocabulary: instructions, parameter values, commands, rules, proposals.

Everything here is an immutable value object; pipeline stages produce new
instances instead of mutating. The JSON shapes emitted by the serializers in
this module are the interchange format between pipeline stages, fixtures, and
the review console.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum

PARAM_KINDS = ("decimal", "integer", "string", "boolean")

# [slot_name] syntax: snake segments starting lowercase; camelCase segments
# are allowed so schema argument names can name slots directly. Nested or
# empty brackets are rejected.
PLACEHOLDER_RE = re.compile(r"^\[[a-z][a-zA-Z0-9]*(?:_[a-zA-Z0-9]+)*\]$")

COMPARATORS = ("eq", "lt", "gt", "le", "ge")


class EmptyCommands(ValueError):
    """Raised when serializing a subtask that has no derived commands."""


class WrongStatus(RuntimeError):
    """Raised on a proposal status transition outside the declared graph."""


class InstructionType(Enum):
    TRIGGER_ACTION = "Trigger-Action Rule"
    DIRECT_CONTROL = "Direct Control Command"
    DEVICE_QUERY = "Device Query"

    @classmethod
    def from_wire(cls, name: str) -> "InstructionType":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown instruction type: {name!r}")


class Provenance(Enum):
    FRESHLY_DECOMPOSED = "freshly_decomposed"
    REUSED_FROM_MEMORY = "reused_from_memory"
    ADDED_BY_PREFERENCE = "added_by_preference"
    ADDED_BY_USER = "added_by_user"


class ProposalStatus(Enum):
    DRAFTING = "drafting"
    AWAITING_REVIEW = "awaiting_review"
    APPROVED = "approved"
    REJECTED = "rejected"
    FAILED = "failed"


_STATUS_GRAPH = {
    ProposalStatus.DRAFTING: {ProposalStatus.AWAITING_REVIEW, ProposalStatus.FAILED},
    ProposalStatus.AWAITING_REVIEW: {ProposalStatus.APPROVED, ProposalStatus.REJECTED},
    ProposalStatus.APPROVED: set(),
    ProposalStatus.REJECTED: set(),
    ProposalStatus.FAILED: set(),
}


def _check_kind(kind: str, value: object) -> None:
    if kind == "decimal":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"decimal payload must be numeric, got {value!r}")
        if not math.isfinite(float(value)):
            raise ValueError(f"decimal payload must be finite, got {value!r}")
    elif kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"integer payload must be an int, got {value!r}")
    elif kind == "string":
        if not isinstance(value, str):
            raise ValueError(f"string payload must be text, got {value!r}")
        if PLACEHOLDER_RE.match(value):
            raise ValueError(
                f"{value!r} is reserved placeholder syntax; use ParamValue.placeholder"
            )
    elif kind == "boolean":
        if not isinstance(value, bool):
            raise ValueError(f"boolean payload must be a bool, got {value!r}")
    else:
        raise ValueError(f"unknown parameter kind: {kind!r}")


@dataclass(frozen=True)
class ParamValue:
    """A typed argument payload: either a concrete scalar or a named slot."""

    kind: str
    payload: object
    is_placeholder: bool = False

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"unknown parameter kind: {self.kind!r}")
        if self.is_placeholder:
            if not isinstance(self.payload, str) or not PLACEHOLDER_RE.match(self.payload):
                raise ValueError(f"malformed placeholder slot: {self.payload!r}")
        else:
            _check_kind(self.kind, self.payload)

    @classmethod
    def concrete(cls, kind: str, value: object) -> "ParamValue":
        return cls(kind, value, is_placeholder=False)

    @classmethod
    def placeholder(cls, kind: str, slot: str) -> "ParamValue":
        text = slot if slot.startswith("[") else f"[{slot}]"
        return cls(kind, text, is_placeholder=True)

    @property
    def slot(self) -> str | None:
        """Slot name without brackets, or None for concrete values."""
        if not self.is_placeholder:
            return None
        return str(self.payload)[1:-1]


@dataclass(frozen=True)
class CommandArg:
    """Named argument. The name never reaches the wire; it is resolved from
    the capability schema and used for template abstraction and slot edits."""

    name: str
    value: ParamValue


@dataclass(frozen=True)
class DeviceCommand:
    description: str
    device_name: str
    capability_name: str
    command_name: str
    arguments: tuple[CommandArg, ...] = ()

    def __post_init__(self):
        for attr in ("device_name", "capability_name", "command_name"):
            if not getattr(self, attr):
                raise ValueError(f"DeviceCommand.{attr} must be non-empty")

    def placeholder_slots(self) -> list[str]:
        return [a.value.slot for a in self.arguments if a.value.is_placeholder]

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.device_name, self.capability_name, self.command_name)

    def to_wire(self) -> dict:
        """The command's published JSON shape (argument names are dropped)."""
        value: dict[str, object] = {}
        for arg in self.arguments:
            if arg.value.kind in value:
                raise ValueError(
                    f"wire shape cannot carry two {arg.value.kind!r} arguments"
                )
            value[arg.value.kind] = arg.value.payload
        return {
            "desc": self.description,
            "device": {
                "name": self.device_name,
                "capability": {
                    "name": self.capability_name,
                    "command": self.command_name,
                    "value": value,
                },
            },
        }

    @classmethod
    def from_wire(cls, data: dict) -> "DeviceCommand":
        device = data["device"]
        cap = device["capability"]
        args = []
        for kind, payload in cap.get("value", {}).items():
            if isinstance(payload, str) and PLACEHOLDER_RE.match(payload):
                args.append(CommandArg("", ParamValue.placeholder(kind, payload)))
            else:
                args.append(CommandArg("", ParamValue.concrete(kind, payload)))
        return cls(
            description=data.get("desc", ""),
            device_name=device["name"],
            capability_name=cap["name"],
            command_name=cap["command"],
            arguments=tuple(args),
        )


@dataclass(frozen=True)
class TriggerPredicate:
    """One conjunct of a rule condition; values are always concrete."""

    device_name: str
    attribute_name: str
    comparator: str
    value: ParamValue

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator: {self.comparator!r}")
        if self.value.is_placeholder:
            raise ValueError("trigger predicates cannot contain placeholders")

    def to_wire(self) -> dict:
        return {
            "device": self.device_name,
            "attribute": self.attribute_name,
            "comparator": self.comparator,
            "value": {self.value.kind: self.value.payload},
        }

    @classmethod
    def from_wire(cls, data: dict) -> "TriggerPredicate":
        ((kind, payload),) = data["value"].items()
        return cls(
            device_name=data["device"],
            attribute_name=data["attribute"],
            comparator=data["comparator"],
            value=ParamValue.concrete(kind, payload),
        )


@dataclass(frozen=True)
class TriggerActionRule:
    """Installed automation: condition conjunction plus ordered actions."""

    rule_id: str
    triggers: tuple[TriggerPredicate, ...]
    actions: tuple[DeviceCommand, ...]

    def __post_init__(self):
        if not self.triggers:
            raise ValueError("rule needs at least one trigger predicate")
        if not self.actions:
            raise ValueError("rule needs at least one action")
        for action in self.actions:
            if action.placeholder_slots():
                raise ValueError(
                    f"rule {self.rule_id!r}: unresolved placeholders in actions"
                )


@dataclass(frozen=True)
class SlotRef:
    """Where a placeholder slot lives inside a subtask's command list.

    Kept after refinement so user edits and memory commits can address the
    value even once the placeholder itself is gone.
    """

    slot: str
    command_index: int
    arg_index: int


@dataclass(frozen=True)
class Subtask:
    description: str
    device_name: str
    commands: tuple[DeviceCommand, ...] = ()
    provenance: Provenance = Provenance.FRESHLY_DECOMPOSED
    role: str = "action"  # action | trigger | query
    predicates: tuple[TriggerPredicate, ...] = ()
    attribute_name: str = ""  # query role only
    slot_refs: tuple[SlotRef, ...] = ()
    flagged_slots: tuple[str, ...] = ()
    refine_targets: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        if self.role not in ("action", "trigger", "query"):
            raise ValueError(f"unknown subtask role: {self.role!r}")

    def placeholder_slots(self) -> list[str]:
        slots = []
        for cmd in self.commands:
            slots.extend(cmd.placeholder_slots())
        return slots

    def slot_inventory(self) -> dict[str, SlotRef]:
        return {ref.slot: ref for ref in self.slot_refs}

    def capture_slot_refs(self) -> "Subtask":
        """Record the location of every placeholder currently in commands."""
        refs = []
        for ci, cmd in enumerate(self.commands):
            for ai, arg in enumerate(cmd.arguments):
                if arg.value.is_placeholder:
                    refs.append(SlotRef(arg.value.slot, ci, ai))
        return replace(self, slot_refs=tuple(refs))

    def slot_values(self) -> dict[str, ParamValue]:
        """Current values at each recorded slot location."""
        out = {}
        for ref in self.slot_refs:
            cmd = self.commands[ref.command_index]
            out[ref.slot] = cmd.arguments[ref.arg_index].value
        return out


@dataclass(frozen=True)
class TaskProposal:
    proposal_id: str
    instruction_text: str
    instruction_type: InstructionType
    context_keyword: str = ""
    subtasks: tuple[Subtask, ...] = ()
    status: ProposalStatus = ProposalStatus.DRAFTING
    correction_rounds_used: int = 0
    call_trace: tuple[tuple[str, int], ...] = ()
    notices: tuple[str, ...] = ()

    def with_status(self, new: ProposalStatus) -> "TaskProposal":
        if new not in _STATUS_GRAPH[self.status]:
            raise WrongStatus(f"cannot move {self.status.value} -> {new.value}")
        return replace(self, status=new)

    def action_subtasks(self) -> tuple[Subtask, ...]:
        return tuple(s for s in self.subtasks if s.role == "action")

    def trigger_subtasks(self) -> tuple[Subtask, ...]:
        return tuple(s for s in self.subtasks if s.role == "trigger")

    def all_commands(self) -> list[DeviceCommand]:
        return [c for s in self.subtasks for c in s.commands]


@dataclass(frozen=True)
class DeviceDescriptor:
    """A device as the platform advertises it: name, placement, capabilities.

    Capability details (attributes, commands, constraints) live in the schema
    corpus so the validator and the simulator share one interpretation; the
    descriptor only names which capabilities the device carries.
    """

    device_name: str
    room: str
    capabilities: tuple[str, ...]
    available: bool = True

    def __post_init__(self):
        if len(set(self.capabilities)) != len(self.capabilities):
            raise ValueError(f"duplicate capability on {self.device_name!r}")


def proposal_id_for(instruction_text: str) -> str:
    """Deterministic opaque id so scripted runs are reproducible byte-for-byte."""
    digest = hashlib.sha256(instruction_text.encode("utf-8")).hexdigest()
    return f"p-{digest[:12]}"


# ---------------------------------------------------------------------------
# Stage wire shapes


def _subtask_entry(subtask: Subtask) -> dict:
    return {"subtask": subtask.description, "device": subtask.device_name}


def serialize_decompose_output(proposal: TaskProposal) -> str:
    """Decompose-stage JSON: CommandType plus per-type payload objects."""
    doc: dict[str, object] = {"CommandType": proposal.instruction_type.value}
    if proposal.instruction_type is InstructionType.DIRECT_CONTROL:
        doc["Action"] = {
            "name": proposal.instruction_text,
            "possible subtask list": [_subtask_entry(s) for s in proposal.action_subtasks()],
        }
    elif proposal.instruction_type is InstructionType.TRIGGER_ACTION:
        doc["Trigger"] = {
            "name": proposal.instruction_text,
            "possible subtask list": [_subtask_entry(s) for s in proposal.trigger_subtasks()],
        }
        doc["Action"] = {
            "name": proposal.instruction_text,
            "possible subtask list": [_subtask_entry(s) for s in proposal.action_subtasks()],
        }
    else:
        doc["Query"] = {
            "name": proposal.instruction_text,
            "target attribute list": [
                {"attribute": s.attribute_name, "device": s.device_name}
                for s in proposal.subtasks
            ],
        }
    return json.dumps(doc)


def parse_decompose_output(text: str) -> tuple[InstructionType, list[Subtask]]:
    """Inverse of serialize_decompose_output; returns bare subtask stubs."""
    doc = json.loads(text)
    itype = InstructionType.from_wire(doc["CommandType"])
    subtasks: list[Subtask] = []
    if itype is InstructionType.DEVICE_QUERY:
        for entry in doc["Query"]["target attribute list"]:
            subtasks.append(
                Subtask(
                    description=entry["attribute"],
                    device_name=entry["device"],
                    role="query",
                    attribute_name=entry["attribute"],
                )
            )
        return itype, subtasks
    if itype is InstructionType.TRIGGER_ACTION:
        for entry in doc["Trigger"]["possible subtask list"]:
            subtasks.append(
                Subtask(entry["subtask"], entry["device"], role="trigger")
            )
    for entry in doc["Action"]["possible subtask list"]:
        subtasks.append(Subtask(entry["subtask"], entry["device"], role="action"))
    return itype, subtasks


def serialize_derive_output(subtask: Subtask) -> str:
    """Derive-stage JSON for one subtask; placeholders keep their slot text."""
    if not subtask.commands:
        raise EmptyCommands(f"subtask {subtask.description!r} has no commands")
    doc = {
        "subtask": subtask.description,
        "commands": [c.to_wire() for c in subtask.commands],
    }
    return json.dumps(doc)


def parse_derive_output(text: str) -> Subtask:
    doc = json.loads(text)
    commands = tuple(DeviceCommand.from_wire(c) for c in doc["commands"])
    if not commands:
        raise EmptyCommands(f"derive output for {doc.get('subtask')!r} is empty")
    device = commands[0].device_name
    return Subtask(description=doc["subtask"], device_name=device, commands=commands)


def serialize_trigger_output(subtask: Subtask) -> str:
    """Derive-stage JSON for a trigger-side subtask (condition predicates)."""
    doc = {
        "subtask": subtask.description,
        "triggers": [p.to_wire() for p in subtask.predicates],
    }
    return json.dumps(doc)


def parse_trigger_output(text: str) -> Subtask:
    doc = json.loads(text)
    predicates = tuple(TriggerPredicate.from_wire(p) for p in doc["triggers"])
    if not predicates:
        raise ValueError(f"trigger output for {doc.get('subtask')!r} is empty")
    return Subtask(
        description=doc["subtask"],
        device_name=predicates[0].device_name,
        role="trigger",
        predicates=predicates,
    )


# ---------------------------------------------------------------------------
# Proposal envelope (superset of the stage shapes; round-trips losslessly)


def _command_to_envelope(cmd: DeviceCommand) -> dict:
    entry = cmd.to_wire()
    if any(a.name for a in cmd.arguments):
        entry["arg_names"] = [a.name for a in cmd.arguments]
    return entry


def _command_from_envelope(entry: dict) -> DeviceCommand:
    cmd = DeviceCommand.from_wire(entry)
    names = entry.get("arg_names")
    if names:
        args = tuple(
            CommandArg(name, arg.value) for name, arg in zip(names, cmd.arguments)
        )
        cmd = replace(cmd, arguments=args)
    return cmd


def subtask_to_envelope(subtask: Subtask) -> dict:
    return {
        "subtask": subtask.description,
        "device": subtask.device_name,
        "role": subtask.role,
        "provenance": subtask.provenance.value,
        "attribute": subtask.attribute_name,
        "commands": [_command_to_envelope(c) for c in subtask.commands],
        "triggers": [p.to_wire() for p in subtask.predicates],
        "slots": [
            {"name": r.slot, "command": r.command_index, "arg": r.arg_index}
            for r in subtask.slot_refs
        ],
        "flagged": list(subtask.flagged_slots),
        "targets": [list(t) for t in subtask.refine_targets],
    }


def subtask_from_envelope(entry: dict) -> Subtask:
    return Subtask(
        description=entry["subtask"],
        device_name=entry["device"],
        commands=tuple(_command_from_envelope(c) for c in entry["commands"]),
        provenance=Provenance(entry["provenance"]),
        role=entry["role"],
        predicates=tuple(TriggerPredicate.from_wire(p) for p in entry["triggers"]),
        attribute_name=entry["attribute"],
        slot_refs=tuple(
            SlotRef(s["name"], s["command"], s["arg"]) for s in entry["slots"]
        ),
        flagged_slots=tuple(entry["flagged"]),
        refine_targets=tuple(tuple(t) for t in entry["targets"]),
    )


def proposal_to_json(proposal: TaskProposal) -> str:
    doc = {
        "proposal_id": proposal.proposal_id,
        "instruction": proposal.instruction_text,
        "type": proposal.instruction_type.value,
        "context": proposal.context_keyword,
        "status": proposal.status.value,
        "correction_rounds": proposal.correction_rounds_used,
        "call_trace": [list(t) for t in proposal.call_trace],
        "notices": list(proposal.notices),
        "subtasks": [subtask_to_envelope(s) for s in proposal.subtasks],
    }
    return json.dumps(doc)


def proposal_from_json(text: str) -> TaskProposal:
    doc = json.loads(text)
    return TaskProposal(
        proposal_id=doc["proposal_id"],
        instruction_text=doc["instruction"],
        instruction_type=InstructionType.from_wire(doc["type"]),
        context_keyword=doc["context"],
        subtasks=tuple(subtask_from_envelope(s) for s in doc["subtasks"]),
        status=ProposalStatus(doc["status"]),
        correction_rounds_used=doc["correction_rounds"],
        call_trace=tuple((s, n) for s, n in doc["call_trace"]),
        notices=tuple(doc["notices"]),
    )
