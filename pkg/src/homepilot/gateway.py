"""Uniform chat/embedding interface with cost accounting and call tracing.

Two interchangeable backends: an HTTP client for chat-completions-style
providers, and a scripted backend that replays a playbook file so every test
and desk experiment is deterministic. All chat traffic lands in one append-only
cost ledger kept in exact rational arithmetic.
"""

from __future__ import annotations

import hashlib
import math
import re
import string
import threading
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml


class ProviderUnreachable(RuntimeError):
    pass


class MalformedResponse(RuntimeError):
    pass


class PlaybookMiss(LookupError):
    pass


class EmptyText(ValueError):
    pass


class StageTag(Enum):
    CLASSIFY = "classify"
    DECOMPOSE = "decompose"
    DERIVE = "derive"
    REFINE = "refine"
    SELF_CORRECT = "self_correct"
    CONTEXT_KEYWORD = "context_keyword"
    PREFERENCE_EXTRACT = "preference_extract"
    ALTERNATIVE_SUGGEST = "alternative_suggest"


@dataclass(frozen=True)
class ChatRequest:
    stage_tag: StageTag
    messages: tuple[tuple[str, str], ...]  # (role, text)
    decoding_temperature: float = 0.0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("chat request needs at least one message")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int
    output_tokens: int
    model_id: str

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be >= 0")


@dataclass(frozen=True)
class LedgerEntry:
    stage_tag: StageTag
    model_id: str
    input_tokens: int
    output_tokens: int


class CostLedger:
    """Append-only token log; totals computed exactly with Fractions."""

    def __init__(self, pricing: dict[str, tuple[Fraction, Fraction]] | None = None):
        self.pricing = pricing or {}
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    def record(self, entry: LedgerEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[LedgerEntry]:
        with self._lock:
            return list(self._entries)

    def total_tokens(self) -> tuple[int, int]:
        entries = self.entries
        return (
            sum(e.input_tokens for e in entries),
            sum(e.output_tokens for e in entries),
        )

    def total_cost(self, entries: list[LedgerEntry] | None = None) -> Fraction:
        total = Fraction(0)
        for entry in entries if entries is not None else self.entries:
            price_in, price_out = self.pricing.get(entry.model_id, (Fraction(0), Fraction(0)))
            total += entry.input_tokens * price_in + entry.output_tokens * price_out
        return total

    def __len__(self) -> int:
        return len(self.entries)


def load_pricing(path: str | Path) -> dict[str, tuple[Fraction, Fraction]]:
    """Pricing config: USD per million tokens, parsed exactly from strings."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    table = {}
    for model, prices in (raw.get("models") or {}).items():
        per_in = Fraction(str(prices["input_per_million"])) / 1_000_000
        per_out = Fraction(str(prices["output_per_million"])) / 1_000_000
        table[model] = (per_in, per_out)
    return table


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def deterministic_embedding(text: str, buckets: int = 256) -> np.ndarray:
    """Hashed bag-of-words, unit L2 norm. Stable across processes (sha256)."""
    if not text or not text.strip():
        raise EmptyText("cannot embed empty text")
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    if not tokens:
        raise EmptyText("text contains no tokens after normalization")
    vec = np.zeros(buckets, dtype=np.float64)
    for token in tokens:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        vec[int.from_bytes(digest[:8], "big") % buckets] += 1.0
    return vec / np.linalg.norm(vec)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


def estimate_tokens(text: str) -> int:
    """Fallback when a playbook entry ships no token counts."""
    return math.ceil(len(text) / 4)


def extract_key(messages: tuple[tuple[str, str], ...]) -> str:
    """Playbook lookup key: content of the final message's last 'input:' line,
    or the whole final message if no such line exists."""
    final = messages[-1][1]
    key = final.strip()
    for line in final.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("input:"):
            key = stripped[len("input:"):].strip()
    return key


@dataclass(frozen=True)
class PlaybookEntry:
    stage: StageTag
    response: str
    match: str | None = None
    pattern: re.Pattern | None = None
    input_tokens: int | None = None
    output_tokens: int | None = None


class Playbook:
    def __init__(self, entries: list[PlaybookEntry], default_behavior: str = "error"):
        if default_behavior not in ("error", "echo"):
            raise ValueError(f"unknown playbook default: {default_behavior!r}")
        self.default_behavior = default_behavior
        self._exact: dict[tuple[StageTag, str], PlaybookEntry] = {}
        self._patterns: list[PlaybookEntry] = []
        for entry in entries:
            if entry.match is not None:
                slot = (entry.stage, entry.match)
                if slot in self._exact:
                    raise ValueError(
                        f"duplicate playbook entry for ({entry.stage.value}, {entry.match!r})"
                    )
                self._exact[slot] = entry
            else:
                self._patterns.append(entry)

    def lookup(self, stage: StageTag, key: str) -> PlaybookEntry | None:
        entry = self._exact.get((stage, key))
        if entry is not None:
            return entry
        for candidate in self._patterns:
            if candidate.stage is stage and candidate.pattern.search(key):
                return candidate
        return None

    @classmethod
    def load(cls, path: str | Path) -> "Playbook":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        entries = []
        for item in raw.get("entries", []) or []:
            stage = StageTag(item["stage"])
            tokens = item.get("tokens") or {}
            entries.append(
                PlaybookEntry(
                    stage=stage,
                    response=str(item["response"]),
                    match=item.get("match"),
                    pattern=re.compile(item["match_pattern"]) if "match_pattern" in item else None,
                    input_tokens=tokens.get("input"),
                    output_tokens=tokens.get("output"),
                )
            )
        for entry in entries:
            if entry.match is None and entry.pattern is None:
                raise ValueError("playbook entry needs 'match' or 'match_pattern'")
        return cls(entries, default_behavior=raw.get("default", "error"))


class ScriptedBackend:
    """Replays playbook responses; token counts are simulated."""

    model_id = "scripted-v1"

    def __init__(self, playbook: Playbook):
        self.playbook = playbook

    def chat(self, req: ChatRequest) -> ChatResponse:
        key = extract_key(req.messages)
        entry = self.playbook.lookup(req.stage_tag, key)
        if entry is None:
            if self.playbook.default_behavior == "echo":
                entry = PlaybookEntry(stage=req.stage_tag, response=key, match=key)
            else:
                raise PlaybookMiss(
                    f"no playbook entry for stage {req.stage_tag.value!r} key {key!r}"
                )
        prompt_chars = sum(len(text) for _, text in req.messages)
        input_tokens = entry.input_tokens
        if input_tokens is None:
            input_tokens = estimate_tokens("x" * prompt_chars)
        output_tokens = entry.output_tokens
        if output_tokens is None:
            output_tokens = estimate_tokens(entry.response)
        return ChatResponse(
            text=entry.response,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            model_id=self.model_id,
        )

    def embed(self, text: str) -> np.ndarray:
        return deterministic_embedding(text)


class HttpBackend:
    """Chat-completions-style provider client (OpenAI-compatible shapes)."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str = "",
        embedding_model_id: str = "",
        transport=None,
        timeout: float = 60.0,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.embedding_model_id = embedding_model_id or model_id
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def chat(self, req: ChatRequest) -> ChatResponse:
        import httpx

        payload = {
            "model": self.model_id,
            "temperature": req.decoding_temperature,
            "messages": [{"role": role, "content": text} for role, text in req.messages],
        }
        try:
            resp = self._client.post(f"{self.base_url}/chat/completions", json=payload)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise ProviderUnreachable(str(exc)) from exc
        try:
            body = resp.json()
            usage = body.get("usage", {})
            return ChatResponse(
                text=body["choices"][0]["message"]["content"],
                input_tokens=int(usage.get("prompt_tokens", 0)),
                output_tokens=int(usage.get("completion_tokens", 0)),
                model_id=body.get("model", self.model_id),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"unexpected chat payload: {exc}") from exc

    def embed(self, text: str) -> np.ndarray:
        import httpx

        if not text:
            raise EmptyText("cannot embed empty text")
        payload = {"model": self.embedding_model_id, "input": text}
        try:
            resp = self._client.post(f"{self.base_url}/embeddings", json=payload)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise ProviderUnreachable(str(exc)) from exc
        try:
            vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"unexpected embedding payload: {exc}") from exc
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise MalformedResponse("embedding has zero norm")
        return vec / norm


class LlmGateway:
    """Backend plus ledger; every chat call records exactly one entry."""

    def __init__(self, backend, ledger: CostLedger | None = None):
        self.backend = backend
        self.ledger = ledger if ledger is not None else CostLedger()

    def chat(self, req: ChatRequest) -> ChatResponse:
        resp = self.backend.chat(req)
        self.ledger.record(
            LedgerEntry(
                stage_tag=req.stage_tag,
                model_id=resp.model_id,
                input_tokens=resp.input_tokens,
                output_tokens=resp.output_tokens,
            )
        )
        return resp

    def embed(self, text: str) -> np.ndarray:
        return self.backend.embed(text)


class SessionGateway:
    """Per-session view of the gateway that counts calls by stage."""

    def __init__(self, gateway: LlmGateway):
        self._gateway = gateway
        self._counts: dict[StageTag, int] = {}
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()

    def chat(self, req: ChatRequest) -> ChatResponse:
        resp = self._gateway.chat(req)
        with self._lock:
            self._counts[req.stage_tag] = self._counts.get(req.stage_tag, 0) + 1
            self._entries.append(
                LedgerEntry(req.stage_tag, resp.model_id, resp.input_tokens, resp.output_tokens)
            )
        return resp

    def embed(self, text: str) -> np.ndarray:
        return self._gateway.embed(text)

    def calls(self, stage: StageTag) -> int:
        return self._counts.get(stage, 0)

    def total_calls(self) -> int:
        return sum(self._counts.values())

    def session_cost(self) -> Fraction:
        return self._gateway.ledger.total_cost(self._entries)

    def session_tokens(self) -> tuple[int, int]:
        return (
            sum(e.input_tokens for e in self._entries),
            sum(e.output_tokens for e in self._entries),
        )


def call_trace(session: SessionGateway) -> list[tuple[str, int]]:
    """Per-stage call counts in first-call order."""
    return [(stage.value, count) for stage, count in session._counts.items()]
