"""Device-agnostic preference modeling over six environmental properties.

Interaction logs (command + instruction context) are distilled into per-context
tables mapping properties to low/medium/high levels. Two extractors: an LLM
path (few-shot prompt, scripted in tests) and a deterministic baseline that
bins parameter observations via explicit config. The tables feed the Refine
stage as (property, level, direction) targets, which is how a preference
learned on one device transfers to any other device affecting the same
property.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml

from .domain import DeviceCommand, Subtask, _command_from_envelope, _command_to_envelope
from .gateway import ChatRequest, StageTag
from .registry import SchemaCorpus


class EmptyLogs(ValueError):
    pass


class UnparseableTable(ValueError):
    pass


class PreferenceConfigError(ValueError):
    pass


class EnvProperty(Enum):
    AIR_QUALITY = "air_quality"
    BRIGHTNESS = "brightness"
    HUMIDITY = "humidity"
    NOISE = "noise"
    TEMPERATURE = "temperature"
    SECURITY = "security"


LEVELS = ("low", "medium", "high")


@dataclass(frozen=True)
class Effect:
    prop: EnvProperty
    direction: str  # increases | decreases


class EffectMap:
    """(capability, command) -> environmental effects, EUPont-style."""

    def __init__(self, entries: dict[tuple[str, str], tuple[Effect, ...]]):
        self.entries = entries

    def effects(self, capability: str, command: str) -> tuple[Effect, ...]:
        return self.entries.get((capability, command), ())

    @classmethod
    def load(cls, path: str | Path) -> "EffectMap":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        entries = {}
        for item in raw.get("effects", []) or []:
            effects = tuple(
                Effect(EnvProperty(e["property"]), e["direction"])
                for e in item.get("affects", [])
            )
            for effect in effects:
                if effect.direction not in ("increases", "decreases"):
                    raise PreferenceConfigError(
                        f"bad direction {effect.direction!r} for {item['capability']}"
                    )
            entries[(item["capability"], item["command"])] = effects
        return cls(entries)

    def to_json(self) -> list[dict]:
        return [
            {
                "capability": cap,
                "command": cmd,
                "affects": [{"property": e.prop.value, "direction": e.direction} for e in effs],
            }
            for (cap, cmd), effs in sorted(self.entries.items())
        ]


@dataclass(frozen=True)
class BinRule:
    capability: str
    command: str
    prop: EnvProperty
    mode: str  # absolute | range_fraction
    low_below: float | None = None
    high_above: float | None = None
    invert: bool = False


@dataclass(frozen=True)
class BinConfig:
    rules: tuple[BinRule, ...]
    security_low_below: float = 0.10
    security_high_above: float = 0.25

    def rule_for(self, capability: str, command: str) -> BinRule | None:
        for rule in self.rules:
            if rule.capability == capability and rule.command == command:
                return rule
        return None

    @classmethod
    def load(cls, path: str | Path) -> "BinConfig":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        rules = tuple(
            BinRule(
                capability=item["capability"],
                command=item["command"],
                prop=EnvProperty(item["property"]),
                mode=item["mode"],
                low_below=item.get("low_below"),
                high_above=item.get("high_above"),
                invert=item.get("invert", False),
            )
            for item in raw.get("rules", []) or []
        )
        security = raw.get("security") or {}
        return cls(
            rules=rules,
            security_low_below=security.get("low_below", 0.10),
            security_high_above=security.get("high_above", 0.25),
        )


@dataclass(frozen=True)
class InteractionLogEntry:
    tick: int
    context_keyword: str  # "normal" when the instruction had no context
    command: DeviceCommand
    source_id: str = ""  # approval replay token; "" for organic entries

    def to_json(self) -> dict:
        doc = {
            "tick": self.tick,
            "context": self.context_keyword,
            "command": _command_to_envelope(self.command),
        }
        if self.source_id:
            doc["source"] = self.source_id
        return doc

    @classmethod
    def from_json(cls, raw: dict) -> "InteractionLogEntry":
        return cls(
            tick=raw["tick"],
            context_keyword=raw["context"],
            command=_command_from_envelope(raw["command"]),
            source_id=raw.get("source", ""),
        )


@dataclass
class PreferenceTable:
    context_keyword: str
    levels: dict[EnvProperty, str] = field(default_factory=dict)
    support: dict[EnvProperty, int] = field(default_factory=dict)

    def level(self, prop: EnvProperty) -> str | None:
        return self.levels.get(prop)

    def to_json(self) -> dict:
        return {
            "context": self.context_keyword,
            "levels": {p.value: lv for p, lv in sorted(self.levels.items(), key=lambda kv: kv[0].value)},
            "support": {p.value: n for p, n in sorted(self.support.items(), key=lambda kv: kv[0].value)},
        }


class LogStore:
    """Append-only interaction log, line-delimited JSON on disk."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.entries: list[InteractionLogEntry] = []
        self.dirty = True
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self.entries.append(InteractionLogEntry.from_json(json.loads(line)))

    def append(self, entry: InteractionLogEntry) -> None:
        self.entries.append(entry)
        self.dirty = True
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(entry.to_json()) + "\n")

    def has_source(self, source_id: str) -> bool:
        return bool(source_id) and any(e.source_id == source_id for e in self.entries)

    def next_tick(self) -> int:
        return max((e.tick for e in self.entries), default=0) + 1


def load_log_fixture(path: str | Path) -> list[InteractionLogEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            entries.append(InteractionLogEntry.from_json(json.loads(line)))
    return entries


def _numeric_arg(cmd: DeviceCommand) -> float | None:
    for arg in cmd.arguments:
        if arg.value.kind in ("decimal", "integer") and not arg.value.is_placeholder:
            return float(arg.value.payload)
    return None


def _bin_absolute(value: float, rule: BinRule) -> str:
    if value < rule.low_below:
        return "low"
    if value > rule.high_above:
        return "high"
    return "medium"


def _bin_fraction(value: float, lo: float, hi: float, invert: bool) -> str:
    span = hi - lo
    frac = (value - lo) / span if span else 0.0
    if frac < 1 / 3:
        level = "low"
    elif frac <= 2 / 3:
        level = "medium"
    else:
        level = "high"
    if invert:
        level = {"low": "high", "medium": "medium", "high": "low"}[level]
    return level


def _majority(levels: list[str]) -> str:
    counts = Counter(levels)
    top = counts.most_common()
    if len(top) > 1 and top[0][1] == top[1][1]:
        return "medium"  # ties are inconclusive evidence
    return top[0][0]


class PreferenceEngine:
    def __init__(
        self,
        effect_map: EffectMap,
        bins: BinConfig,
        corpus: SchemaCorpus,
        gateway=None,
    ):
        self.effect_map = effect_map
        self.bins = bins
        self.corpus = corpus
        self.gateway = gateway
        self._tables: dict[str, PreferenceTable] = {"normal": PreferenceTable("normal")}

    # -- extraction -----------------------------------------------------------

    def _arg_range(self, capability: str, command: str) -> tuple[float, float]:
        schema = self.corpus.get(capability)
        spec = schema.command(command) if schema else None
        if spec:
            for arg in spec.args:
                if arg.kind in ("decimal", "integer"):
                    return (arg.minimum or 0.0, arg.maximum or 1.0)
        return (0.0, 1.0)

    def _baseline_table(self, keyword: str, entries: list[InteractionLogEntry]) -> PreferenceTable:
        observations: dict[EnvProperty, list[str]] = {}
        security_hits = 0
        for entry in entries:
            cmd = entry.command
            for effect in self.effect_map.effects(cmd.capability_name, cmd.command_name):
                if effect.prop is EnvProperty.SECURITY:
                    if effect.direction == "increases":
                        security_hits += 1
                    continue
                rule = self.bins.rule_for(cmd.capability_name, cmd.command_name)
                if rule is None or rule.prop is not effect.prop:
                    continue
                value = _numeric_arg(cmd)
                if value is None:
                    continue
                if rule.mode == "absolute":
                    level = _bin_absolute(value, rule)
                else:
                    lo, hi = self._arg_range(cmd.capability_name, cmd.command_name)
                    level = _bin_fraction(value, lo, hi, rule.invert)
                observations.setdefault(effect.prop, []).append(level)
        table = PreferenceTable(context_keyword=keyword)
        for prop, levels in observations.items():
            table.levels[prop] = _majority(levels)
            table.support[prop] = len(levels)
        if security_hits:
            ratio = security_hits / len(entries)
            if ratio < self.bins.security_low_below:
                level = "low"
            elif ratio > self.bins.security_high_above:
                level = "high"
            else:
                level = "medium"
            table.levels[EnvProperty.SECURITY] = level
            table.support[EnvProperty.SECURITY] = security_hits
        return table

    def _llm_table(self, keyword: str, entries: list[InteractionLogEntry]) -> PreferenceTable:
        if self.gateway is None:
            raise PreferenceConfigError("LLM extraction requires a gateway")
        from .prompts import render_prompt

        prompt = render_prompt(
            "preference_extract",
            effects=json.dumps(self.effect_map.to_json()),
            logs="\n".join(json.dumps(e.to_json()) for e in entries),
            context=keyword,
        )
        resp = self.gateway.chat(
            ChatRequest(StageTag.PREFERENCE_EXTRACT, (("user", prompt),))
        )
        try:
            doc = json.loads(resp.text)
            levels = {
                EnvProperty(prop): level
                for prop, level in doc["levels"].items()
                if level in LEVELS
            }
        except (ValueError, KeyError, TypeError) as exc:
            raise UnparseableTable(f"bad preference table for {keyword!r}: {exc}") from exc
        # Support counts are mechanical bookkeeping either way.
        baseline = self._baseline_table(keyword, entries)
        table = PreferenceTable(context_keyword=keyword)
        for prop, level in levels.items():
            if prop in baseline.support:  # never fabricate unobserved properties
                table.levels[prop] = level
                table.support[prop] = baseline.support[prop]
        return table

    def extract_tables(
        self, logs: list[InteractionLogEntry], mode: str = "baseline"
    ) -> dict[str, PreferenceTable]:
        """One table per observed context plus 'normal' over all logs."""
        if not logs:
            raise EmptyLogs("no interaction logs to extract preferences from")
        build = self._llm_table if mode == "llm" else self._baseline_table
        grouped: dict[str, list[InteractionLogEntry]] = {}
        for entry in logs:
            keyword = entry.context_keyword.strip().lower() or "normal"
            grouped.setdefault(keyword, []).append(entry)
        tables = {"normal": build("normal", logs)}
        for keyword, entries in sorted(grouped.items()):
            if keyword == "normal":
                continue
            tables[keyword] = build(keyword, entries)
        self._tables = tables
        return tables

    def refresh(self, store: LogStore, mode: str = "baseline") -> None:
        """Rebuild tables on demand when logs changed since the last build."""
        if not store.dirty:
            return
        if store.entries:
            self.extract_tables(store.entries, mode=mode)
        else:
            self._tables = {"normal": PreferenceTable("normal")}
        store.dirty = False

    # -- reflection -------------------------------------------------------------

    def tables(self) -> dict[str, PreferenceTable]:
        return self._tables

    def select_table(self, context_keyword: str) -> PreferenceTable:
        if "normal" not in self._tables:
            raise PreferenceConfigError("the 'normal' preference table is missing")
        keyword = context_keyword.strip().lower()
        return self._tables.get(keyword, self._tables["normal"])

    def property_targets(
        self, subtask: Subtask, table: PreferenceTable
    ) -> list[tuple[str, str, str]]:
        """(property, level, direction) per command effect, observed props only."""
        targets: list[tuple[str, str, str]] = []
        for cmd in subtask.commands:
            for effect in self.effect_map.effects(cmd.capability_name, cmd.command_name):
                level = table.level(effect.prop)
                if level is None:
                    continue
                item = (effect.prop.value, level, effect.direction)
                if item not in targets:
                    targets.append(item)
        return targets

    def append_feedback_logs(
        self, proposal, store: LogStore, source_id: str = ""
    ) -> list[InteractionLogEntry]:
        """Record an approved proposal's final concrete commands.

        A source_id makes the append idempotent: replaying the same approval
        (crash recovery) writes nothing the second time.
        """
        if store.has_source(source_id):
            return []
        appended = []
        tick = store.next_tick()
        keyword = (proposal.context_keyword or "normal").strip().lower()
        for subtask in proposal.subtasks:
            if subtask.role != "action":
                continue
            for cmd in subtask.commands:
                if cmd.placeholder_slots():
                    continue
                entry = InteractionLogEntry(
                    tick=tick, context_keyword=keyword, command=cmd, source_id=source_id
                )
                store.append(entry)
                appended.append(entry)
                tick += 1
        return appended
