"""Capability schema corpus: parsing, command validation, prompt retrieval.

One YAML document per capability stands in for the platform's API docs. The
same schema objects drive the validator here and the simulator's effect
application, so a command accepted by one is accepted by the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .domain import PARAM_KINDS, CommandArg, DeviceCommand, DeviceDescriptor, ParamValue


class ParseError(ValueError):
    """Schema file rejected; message carries file and line when available."""


class DuplicateCapability(ValueError):
    pass


class EmptyEnvironment(ValueError):
    pass


@dataclass(frozen=True)
class ArgSpec:
    name: str
    kind: str
    enum: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None
    default: object = None

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ParseError(f"argument {self.name!r}: unknown kind {self.kind!r}")
        if self.enum is not None and not self.enum:
            raise ParseError(f"argument {self.name!r}: enum set must be non-empty")
        if self.minimum is not None and self.maximum is not None:
            if self.minimum > self.maximum:
                raise ParseError(f"argument {self.name!r}: min > max")


@dataclass(frozen=True)
class CommandSpec:
    name: str
    args: tuple[ArgSpec, ...] = ()
    # attribute -> literal value, or "$<arg name>" to copy an argument
    sets: tuple[tuple[str, object], ...] = ()


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    enum: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ParseError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.enum is not None and not self.enum:
            raise ParseError(f"attribute {self.name!r}: enum set must be non-empty")
        if self.minimum is not None and self.maximum is not None:
            if self.minimum > self.maximum:
                raise ParseError(f"attribute {self.name!r}: min > max")


@dataclass(frozen=True)
class CapabilitySchema:
    capability_name: str
    commands: tuple[CommandSpec, ...]
    attributes: tuple[AttributeSpec, ...]

    def command(self, name: str) -> CommandSpec | None:
        for cmd in self.commands:
            if cmd.name == name:
                return cmd
        return None

    def attribute(self, name: str) -> AttributeSpec | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None


@dataclass(frozen=True)
class SchemaCorpus:
    schemas: dict[str, CapabilitySchema]
    doc_snippets: dict[str, str]

    def __len__(self) -> int:
        return len(self.schemas)

    def get(self, capability_name: str) -> CapabilitySchema | None:
        return self.schemas.get(capability_name)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationVerdict:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _parse_arg(raw: dict, path: Path) -> ArgSpec:
    try:
        return ArgSpec(
            name=raw["name"],
            kind=raw["kind"],
            enum=tuple(raw["enum"]) if "enum" in raw else None,
            minimum=raw.get("min"),
            maximum=raw.get("max"),
            default=raw.get("default"),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: argument missing field {exc}") from exc


def _parse_capability(path: Path) -> tuple[CapabilitySchema, str]:
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark else "?"
        raise ParseError(f"{path}:{line}: {exc.problem}") from exc
    if not isinstance(raw, dict) or "capability" not in raw:
        raise ParseError(f"{path}: missing top-level 'capability' key")
    commands = []
    for entry in raw.get("commands", []) or []:
        if "name" not in entry:
            raise ParseError(f"{path}: command missing 'name'")
        args = tuple(_parse_arg(a, path) for a in entry.get("args", []) or [])
        sets = tuple((k, v) for k, v in (entry.get("sets") or {}).items())
        commands.append(CommandSpec(name=str(entry["name"]), args=args, sets=sets))
    attributes = []
    for entry in raw.get("attributes", []) or []:
        if "name" not in entry:
            raise ParseError(f"{path}: attribute missing 'name'")
        attributes.append(
            AttributeSpec(
                name=entry["name"],
                kind=entry["kind"],
                enum=tuple(entry["enum"]) if "enum" in entry else None,
                minimum=entry.get("min"),
                maximum=entry.get("max"),
            )
        )
    schema = CapabilitySchema(
        capability_name=raw["capability"],
        commands=tuple(commands),
        attributes=tuple(attributes),
    )
    return schema, raw.get("description", "")


def load_corpus(path: str | Path) -> SchemaCorpus:
    """Parse every *.yaml capability file under path."""
    root = Path(path)
    schemas: dict[str, CapabilitySchema] = {}
    snippets: dict[str, str] = {}
    for file in sorted(root.glob("*.yaml")):
        schema, snippet = _parse_capability(file)
        if schema.capability_name in schemas:
            raise DuplicateCapability(
                f"{file}: capability {schema.capability_name!r} already declared"
            )
        schemas[schema.capability_name] = schema
        snippets[schema.capability_name] = snippet
    return SchemaCorpus(schemas=schemas, doc_snippets=snippets)


def _check_value(spec: ArgSpec, value: ParamValue) -> Violation | None:
    if value.kind != spec.kind:
        return Violation(
            "argument_kind_mismatch",
            f"{spec.name} expects {spec.kind}, got {value.kind}",
        )
    if spec.enum is not None and value.payload not in spec.enum:
        allowed = ", ".join(spec.enum)
        return Violation(
            "enum_violation",
            f"{spec.name} value {value.payload!r} not in {{{allowed}}}",
        )
    if spec.kind in ("decimal", "integer"):
        num = float(value.payload)  # type: ignore[arg-type]
        if spec.minimum is not None and num < spec.minimum:
            return Violation(
                "range_violation", f"{spec.name} value {num} below minimum {spec.minimum}"
            )
        if spec.maximum is not None and num > spec.maximum:
            return Violation(
                "range_violation", f"{spec.name} value {num} above maximum {spec.maximum}"
            )
    return None


def _device_for(cmd: DeviceCommand, env: list[DeviceDescriptor]) -> DeviceDescriptor | None:
    for dev in env:
        if dev.device_name == cmd.device_name:
            return dev
    return None


def validate_command(
    cmd: DeviceCommand,
    env: list[DeviceDescriptor],
    corpus: SchemaCorpus,
    allow_placeholders: bool = False,
) -> ValidationVerdict:
    """Check a command against the environment and schema corpus.

    With allow_placeholders (the post-derive structural check), placeholder
    arguments are kind-checked only; otherwise they are a violation.
    """
    violations: list[Violation] = []
    device = _device_for(cmd, env)
    if device is None:
        return ValidationVerdict(
            (Violation("unknown_device", f"no device named {cmd.device_name!r}"),)
        )
    if cmd.capability_name not in device.capabilities:
        return ValidationVerdict(
            (
                Violation(
                    "unknown_capability",
                    f"{cmd.device_name!r} has no capability {cmd.capability_name!r}",
                ),
            )
        )
    schema = corpus.get(cmd.capability_name)
    if schema is None:
        return ValidationVerdict(
            (
                Violation(
                    "unknown_capability",
                    f"no schema for capability {cmd.capability_name!r}",
                ),
            )
        )
    spec = schema.command(cmd.command_name)
    if spec is None:
        return ValidationVerdict(
            (
                Violation(
                    "unknown_command",
                    f"{cmd.capability_name} has no command {cmd.command_name!r}",
                ),
            )
        )
    if len(cmd.arguments) != len(spec.args):
        violations.append(
            Violation(
                "argument_kind_mismatch",
                f"{cmd.command_name} takes {len(spec.args)} argument(s), got "
                f"{len(cmd.arguments)}",
            )
        )
        return ValidationVerdict(tuple(violations))
    for arg_spec, arg in zip(spec.args, cmd.arguments):
        if arg.value.is_placeholder:
            if not allow_placeholders:
                violations.append(
                    Violation(
                        "unresolved_placeholder",
                        f"{cmd.command_name} argument {arg_spec.name} is "
                        f"unresolved slot {arg.value.payload}",
                    )
                )
            elif arg.value.kind != arg_spec.kind:
                violations.append(
                    Violation(
                        "argument_kind_mismatch",
                        f"{arg_spec.name} expects {arg_spec.kind}, got {arg.value.kind}",
                    )
                )
            continue
        problem = _check_value(arg_spec, arg.value)
        if problem:
            violations.append(problem)
    return ValidationVerdict(tuple(violations))


def resolve_argument_names(cmd: DeviceCommand, corpus: SchemaCorpus) -> DeviceCommand:
    """Fill argument names positionally from the capability schema."""
    schema = corpus.get(cmd.capability_name)
    if schema is None:
        return cmd
    spec = schema.command(cmd.command_name)
    if spec is None or len(spec.args) != len(cmd.arguments):
        return cmd
    args = tuple(
        CommandArg(arg_spec.name, arg.value)
        for arg_spec, arg in zip(spec.args, cmd.arguments)
    )
    from dataclasses import replace

    return replace(cmd, arguments=args)


def retrieve_relevant(
    subtask_text: str,
    corpus: SchemaCorpus,
    env: list[DeviceDescriptor],
    embed_fn,
    k: int = 5,
) -> list[CapabilitySchema]:
    """Top-k capability schemas by snippet similarity, restricted to
    capabilities present on available devices. Deterministic: cosine ranking
    with ties broken by capability name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    supported = set()
    for dev in env:
        if dev.available:
            supported.update(dev.capabilities)
    if not supported:
        raise EmptyEnvironment("no available devices in the environment")
    query = embed_fn(subtask_text)
    scored = []
    for name in sorted(supported):
        schema = corpus.get(name)
        if schema is None:
            continue
        snippet = corpus.doc_snippets.get(name, "")
        score = float(query @ embed_fn(snippet)) if snippet else -1.0
        scored.append((-score, name, schema))
    scored.sort(key=lambda item: (item[0], item[1]))
    return [schema for _, _, schema in scored[:k]]
