"""Deterministic smart-home simulator.

Device state machines are driven entirely by the capability schemas (each
command declares which attributes it sets), so the simulator and the validator
can never disagree. Rules are edge-triggered: a rule fires when its condition
conjunction transitions from false to true, never at install time. Time is a
logical tick counter.

This execute/query/emit surface is also the seam where a real platform client
would plug in.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .domain import DeviceCommand, DeviceDescriptor, ParamValue, TriggerActionRule
from .registry import (
    AttributeSpec,
    SchemaCorpus,
    ValidationVerdict,
    Violation,
    validate_command,
)

log = logging.getLogger(__name__)

DEFAULT_CASCADE_CAP = 8


class UnknownDevice(KeyError):
    pass


class UnknownAttribute(KeyError):
    pass


class InvalidRuleActions(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


class EnvironmentError_(ValueError):
    """Environment fixture rejected at load time."""


@dataclass(frozen=True)
class ExecutionRecord:
    tick: int
    command: DeviceCommand | None  # None only for cascade-cap markers
    ok: bool
    new_values: tuple[tuple[str, object], ...] = ()
    violations: tuple[Violation, ...] = ()
    cause: str = "direct"  # "direct" | "rule"
    rule_id: str | None = None

    def to_json(self) -> dict:
        return {
            "tick": self.tick,
            "command": self.command.to_wire() if self.command else None,
            "ok": self.ok,
            "new_values": dict(self.new_values),
            "violations": [str(v) for v in self.violations],
            "cause": self.cause,
            "rule_id": self.rule_id,
        }


@dataclass
class _Device:
    descriptor: DeviceDescriptor
    attributes: dict[str, ParamValue]


class HomeState:
    """One simulated home. A single writer mutates it; use clone() for
    what-if execution (self-correction never touches the live state)."""

    def __init__(self, corpus: SchemaCorpus, cascade_cap: int = DEFAULT_CASCADE_CAP):
        self.corpus = corpus
        self.cascade_cap = cascade_cap
        self.devices: dict[str, _Device] = {}
        self.rules: dict[str, TriggerActionRule] = {}
        self.event_log: list[ExecutionRecord] = []
        self.clock: int = 0
        self._rule_truth: dict[str, bool] = {}

    # -- construction -------------------------------------------------------

    def add_device(self, descriptor: DeviceDescriptor, attributes: dict[str, ParamValue]):
        expected = self._declared_attributes(descriptor)
        missing = set(expected) - set(attributes)
        if missing:
            raise EnvironmentError_(
                f"{descriptor.device_name!r} missing initial values for {sorted(missing)}"
            )
        for name, value in attributes.items():
            spec = expected.get(name)
            if spec is None:
                raise EnvironmentError_(
                    f"{descriptor.device_name!r} has no attribute {name!r}"
                )
            problem = _attribute_violation(spec, value)
            if problem:
                raise EnvironmentError_(f"{descriptor.device_name!r}: {problem}")
        self.devices[descriptor.device_name] = _Device(descriptor, dict(attributes))

    def _declared_attributes(self, descriptor: DeviceDescriptor) -> dict[str, AttributeSpec]:
        specs: dict[str, AttributeSpec] = {}
        for cap_name in descriptor.capabilities:
            schema = self.corpus.get(cap_name)
            if schema is None:
                raise EnvironmentError_(
                    f"{descriptor.device_name!r} references unknown capability {cap_name!r}"
                )
            for attr in schema.attributes:
                if attr.name in specs:
                    raise EnvironmentError_(
                        f"{descriptor.device_name!r}: attribute {attr.name!r} declared twice"
                    )
                specs[attr.name] = attr
        return specs

    # -- introspection ------------------------------------------------------

    def descriptors(self) -> list[DeviceDescriptor]:
        return [d.descriptor for d in self.devices.values()]

    def available_descriptors(self) -> list[DeviceDescriptor]:
        return [d.descriptor for d in self.devices.values() if d.descriptor.available]

    def is_available(self, device_name: str) -> bool:
        dev = self.devices.get(device_name)
        return bool(dev and dev.descriptor.available)

    def clone(self) -> "HomeState":
        other = HomeState(self.corpus, self.cascade_cap)
        for name, dev in self.devices.items():
            other.devices[name] = _Device(dev.descriptor, dict(dev.attributes))
        other.rules = dict(self.rules)
        other.event_log = list(self.event_log)
        other.clock = self.clock
        other._rule_truth = dict(self._rule_truth)
        return other

    def state_hash(self) -> str:
        doc = {
            "devices": {
                name: {
                    "available": dev.descriptor.available,
                    "attributes": {k: v.payload for k, v in sorted(dev.attributes.items())},
                }
                for name, dev in sorted(self.devices.items())
            },
            "rules": sorted(self.rules),
            "log_len": len(self.event_log),
            "clock": self.clock,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    # -- operations ---------------------------------------------------------

    def execute(self, cmd: DeviceCommand) -> ExecutionRecord:
        """Run a direct command; errors are recorded, never raised."""
        self.clock += 1
        record = self._run_command(cmd, cause="direct", rule_id=None)
        self.event_log.append(record)
        if record.ok:
            self._pump_rules()
        return record

    def install_rule(self, rule: TriggerActionRule) -> None:
        violations: list[Violation] = []
        env = self.descriptors()
        for action in rule.actions:
            verdict = validate_command(action, env, self.corpus)
            violations.extend(verdict.violations)
        for pred in rule.triggers:
            violations.extend(self._predicate_violations(pred))
        if violations:
            raise InvalidRuleActions(violations)
        if rule.rule_id in self.rules:
            log.info("replacing installed rule %s", rule.rule_id)
        self.rules[rule.rule_id] = rule
        # Edge semantics: seed with the current truth so an already-true
        # condition does not fire at install time.
        self._rule_truth[rule.rule_id] = self._evaluate_rule(rule)

    def remove_rule(self, rule_id: str) -> None:
        self.rules.pop(rule_id, None)
        self._rule_truth.pop(rule_id, None)

    def emit_event(self, device_name: str, attribute_name: str, value: object) -> list[ExecutionRecord]:
        """Apply an external attribute change and fire any edge-triggered rules."""
        dev = self.devices.get(device_name)
        if dev is None:
            raise UnknownDevice(device_name)
        spec = self._declared_attributes(dev.descriptor).get(attribute_name)
        if spec is None:
            raise UnknownAttribute(f"{device_name}.{attribute_name}")
        param = _coerce(spec, value)
        problem = _attribute_violation(spec, param)
        if problem:
            raise ValueError(str(problem))
        self.clock += 1
        dev.attributes[attribute_name] = param
        return self._pump_rules()

    def query(self, device_name: str, attribute_name: str) -> ParamValue:
        dev = self.devices.get(device_name)
        if dev is None:
            raise UnknownDevice(device_name)
        if attribute_name not in dev.attributes:
            raise UnknownAttribute(f"{device_name}.{attribute_name}")
        return dev.attributes[attribute_name]

    def set_availability(self, device_name: str, available: bool) -> None:
        dev = self.devices.get(device_name)
        if dev is None:
            raise UnknownDevice(device_name)
        dev.descriptor = DeviceDescriptor(
            device_name=dev.descriptor.device_name,
            room=dev.descriptor.room,
            capabilities=dev.descriptor.capabilities,
            available=available,
        )

    def validate_predicate(self, pred) -> list[Violation]:
        """Schema check for a trigger predicate against this home."""
        return self._predicate_violations(pred)

    # -- internals ----------------------------------------------------------

    def _predicate_violations(self, pred) -> list[Violation]:
        dev = self.devices.get(pred.device_name)
        if dev is None:
            return [Violation("unknown_device", f"no device named {pred.device_name!r}")]
        specs = self._declared_attributes(dev.descriptor)
        spec = specs.get(pred.attribute_name)
        if spec is None:
            return [
                Violation(
                    "unknown_capability",
                    f"{pred.device_name!r} has no attribute {pred.attribute_name!r}",
                )
            ]
        if spec.kind != pred.value.kind:
            return [
                Violation(
                    "argument_kind_mismatch",
                    f"{pred.attribute_name} expects {spec.kind}, got {pred.value.kind}",
                )
            ]
        return []

    def _run_command(self, cmd: DeviceCommand, cause: str, rule_id: str | None) -> ExecutionRecord:
        dev = self.devices.get(cmd.device_name)
        if dev is not None and not dev.descriptor.available:
            return ExecutionRecord(
                tick=self.clock,
                command=cmd,
                ok=False,
                violations=(
                    Violation("device_unavailable", f"{cmd.device_name!r} is unavailable"),
                ),
                cause=cause,
                rule_id=rule_id,
            )
        verdict = validate_command(cmd, self.descriptors(), self.corpus)
        if not verdict.ok:
            return ExecutionRecord(
                tick=self.clock,
                command=cmd,
                ok=False,
                violations=verdict.violations,
                cause=cause,
                rule_id=rule_id,
            )
        schema = self.corpus.get(cmd.capability_name)
        spec = schema.command(cmd.command_name)
        args = {a.name: a.value for a in cmd.arguments}
        new_values = []
        attr_specs = self._declared_attributes(dev.descriptor)
        for attr_name, setting in spec.sets:
            if isinstance(setting, str) and setting.startswith("$"):
                value = args[setting[1:]]
            else:
                value = _coerce(attr_specs[attr_name], setting)
            dev.attributes[attr_name] = value
            new_values.append((attr_name, value.payload))
        return ExecutionRecord(
            tick=self.clock,
            command=cmd,
            ok=True,
            new_values=tuple(new_values),
            cause=cause,
            rule_id=rule_id,
        )

    def _evaluate_rule(self, rule: TriggerActionRule) -> bool:
        for pred in rule.triggers:
            dev = self.devices.get(pred.device_name)
            if dev is None or pred.attribute_name not in dev.attributes:
                return False
            if not _compare(dev.attributes[pred.attribute_name], pred.comparator, pred.value):
                return False
        return True

    def _edge_fired(self) -> list[TriggerActionRule]:
        fired = []
        for rule_id in sorted(self.rules):
            rule = self.rules[rule_id]
            now = self._evaluate_rule(rule)
            before = self._rule_truth.get(rule_id, False)
            self._rule_truth[rule_id] = now
            if now and not before:
                fired.append(rule)
        return fired

    def _pump_rules(self) -> list[ExecutionRecord]:
        """Breadth-first rule cascade with a depth cap."""
        produced: list[ExecutionRecord] = []
        pending = self._edge_fired()
        depth = 0
        while pending:
            depth += 1
            if depth > self.cascade_cap:
                marker = ExecutionRecord(
                    tick=self.clock,
                    command=None,
                    ok=False,
                    violations=(
                        Violation(
                            "cycle_cap",
                            f"rule cascade exceeded depth {self.cascade_cap}; aborted",
                        ),
                    ),
                    cause="rule",
                )
                self.event_log.append(marker)
                produced.append(marker)
                break
            for rule in pending:
                for action in rule.actions:
                    self.clock += 1
                    record = self._run_command(action, cause="rule", rule_id=rule.rule_id)
                    self.event_log.append(record)
                    produced.append(record)
            pending = self._edge_fired()
        return produced

    def export_log_jsonl(self) -> str:
        """Event log as line-delimited JSON, one record per line."""
        return "\n".join(json.dumps(r.to_json()) for r in self.event_log)

    def to_json(self) -> dict:
        return {
            "devices": [
                {
                    "name": dev.descriptor.device_name,
                    "room": dev.descriptor.room,
                    "available": dev.descriptor.available,
                    "capabilities": list(dev.descriptor.capabilities),
                    "attributes": {k: v.payload for k, v in dev.attributes.items()},
                }
                for dev in self.devices.values()
            ],
            "rules": [
                {
                    "rule_id": rule.rule_id,
                    "triggers": [p.to_wire() for p in rule.triggers],
                    "actions": [a.to_wire() for a in rule.actions],
                }
                for rule in self.rules.values()
            ],
            "clock": self.clock,
            "log_length": len(self.event_log),
        }


def _coerce(spec: AttributeSpec, value: object) -> ParamValue:
    if isinstance(value, ParamValue):
        return value
    if spec.kind == "decimal" and isinstance(value, int) and not isinstance(value, bool):
        return ParamValue.concrete("decimal", value)
    return ParamValue.concrete(spec.kind, value)


def _attribute_violation(spec: AttributeSpec, value: ParamValue) -> Violation | None:
    if value.is_placeholder:
        return Violation("unresolved_placeholder", f"{spec.name} cannot hold a placeholder")
    if value.kind != spec.kind:
        return Violation(
            "argument_kind_mismatch", f"{spec.name} expects {spec.kind}, got {value.kind}"
        )
    if spec.enum is not None and value.payload not in spec.enum:
        allowed = ", ".join(spec.enum)
        return Violation(
            "enum_violation", f"{spec.name} value {value.payload!r} not in {{{allowed}}}"
        )
    if spec.kind in ("decimal", "integer"):
        num = float(value.payload)
        if spec.minimum is not None and num < spec.minimum:
            return Violation("range_violation", f"{spec.name} value {num} below minimum")
        if spec.maximum is not None and num > spec.maximum:
            return Violation("range_violation", f"{spec.name} value {num} above maximum")
    return None


def _compare(current: ParamValue, comparator: str, target: ParamValue) -> bool:
    a, b = current.payload, target.payload
    if comparator == "eq":
        return a == b
    try:
        af, bf = float(a), float(b)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return False
    return {
        "lt": af < bf,
        "gt": af > bf,
        "le": af <= bf,
        "ge": af >= bf,
    }[comparator]


def load_environment(fixture: str | Path, corpus: SchemaCorpus, cascade_cap: int = DEFAULT_CASCADE_CAP) -> HomeState:
    """Build a HomeState from an environment fixture file."""
    raw = yaml.safe_load(Path(fixture).read_text()) or {}
    state = HomeState(corpus, cascade_cap=cascade_cap)
    for entry in raw.get("devices", []) or []:
        descriptor = DeviceDescriptor(
            device_name=entry["name"],
            room=entry.get("room", ""),
            capabilities=tuple(entry.get("capabilities", [])),
        )
        specs = state._declared_attributes(descriptor)
        attributes = {}
        for name, value in (entry.get("attributes") or {}).items():
            spec = specs.get(name)
            if spec is None:
                raise EnvironmentError_(f"{descriptor.device_name!r} has no attribute {name!r}")
            attributes[name] = _coerce(spec, value)
        state.add_device(descriptor, attributes)
    return state
