"""Independent reference implementations used as test oracles.

Each is written directly from the stated recipe, not by calling the package,
so a bug in the implementation cannot hide in the expectation.
"""

from __future__ import annotations

import hashlib
import json
import math
import string
from collections import Counter


def embed_oracle(text: str, buckets: int = 256) -> list[float]:
    """Lowercase, strip punctuation, split on whitespace, sha256-bucket each
    token, count, L2-normalize."""
    cleaned = "".join(ch for ch in text.lower() if ch not in string.punctuation)
    counts = [0.0] * buckets
    for token in cleaned.split():
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        counts[int.from_bytes(digest[:8], "big") % buckets] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return [c / norm for c in counts]


def cosine_oracle(a: str, b: str) -> float:
    va, vb = embed_oracle(a), embed_oracle(b)
    return sum(x * y for x, y in zip(va, vb))


def rank_capabilities_oracle(query: str, snippets: dict[str, str], allowed: set[str], k: int):
    """Exhaustive cosine ranking, ties by capability name ascending."""
    scored = []
    for name in allowed:
        snippet = snippets.get(name, "")
        score = cosine_oracle(query, snippet) if snippet else -1.0
        scored.append((-score, name))
    scored.sort()
    return [name for _, name in scored[:k]]


def metric_flags_oracle(generated: list, ground_truth: list, invalid: set) -> dict:
    """Set-comparison flags; `invalid` holds the triples known to be broken."""
    gen = set(generated)
    gt = set(ground_truth)
    insufficient = bool(gt - gen)
    excessive = bool(gen - gt)
    syntax_error = any(t in invalid for t in generated)
    gt_ok = not any(t in invalid for t in generated if t in gt)
    success = (not insufficient) and gt_ok
    return {
        "success": success,
        "success_strict": success and not excessive,
        "excessive": excessive,
        "insufficient": insufficient,
        "syntax_error": syntax_error,
    }


# Bin boundaries restated from the config by hand.
_ABS_BINS = {
    ("thermostatCoolingSetpoint", "setCoolingSetpoint"): ("temperature", 21, 25),
    ("switchLevel", "setLevel"): ("brightness", 34, 66),
    ("humiditySetpoint", "setHumiditySetpoint"): ("humidity", 35, 55),
}
_FRAC_BINS = {
    ("fanSpeed", "setFanSpeed"): ("temperature", 0, 4, True),
    ("audioVolume", "setVolume"): ("noise", 0, 100, False),
}
_SECURITY_UP = {("lock", "lock")}


def _level_abs(value, low, high):
    if value < low:
        return "low"
    if value > high:
        return "high"
    return "medium"


def _level_frac(value, lo, hi, invert):
    frac = (value - lo) / (hi - lo)
    if frac < 1 / 3:
        level = "low"
    elif frac <= 2 / 3:
        level = "medium"
    else:
        level = "high"
    return {"low": "high", "high": "low"}.get(level, level) if invert else level


def tally_tables_oracle(jsonl_path) -> dict:
    """Recount the preference tables straight from a log fixture file."""
    entries = []
    for line in open(jsonl_path):
        if line.strip():
            entries.append(json.loads(line))
    groups: dict[str, list] = {"normal": entries}
    for entry in entries:
        key = entry["context"].strip().lower() or "normal"
        if key != "normal":
            groups.setdefault(key, []).append(entry)

    tables = {}
    for keyword, group in groups.items():
        level_obs: dict[str, list] = {}
        security = 0
        for entry in group:
            cap = entry["command"]["device"]["capability"]
            key = (cap["name"], cap["command"])
            if key in _SECURITY_UP:
                security += 1
                continue
            value = next(iter(cap["value"].values()), None)
            if key in _ABS_BINS and value is not None:
                prop, low, high = _ABS_BINS[key]
                level_obs.setdefault(prop, []).append(_level_abs(value, low, high))
            elif key in _FRAC_BINS and value is not None:
                prop, lo, hi, inv = _FRAC_BINS[key]
                level_obs.setdefault(prop, []).append(_level_frac(value, lo, hi, inv))
        levels, support = {}, {}
        for prop, obs in level_obs.items():
            counts = Counter(obs).most_common()
            if len(counts) > 1 and counts[0][1] == counts[1][1]:
                levels[prop] = "medium"
            else:
                levels[prop] = counts[0][0]
            support[prop] = len(obs)
        if security:
            ratio = security / len(group)
            levels["security"] = "low" if ratio < 0.10 else ("high" if ratio > 0.25 else "medium")
            support["security"] = security
        tables[keyword] = {"levels": levels, "support": support}
    return tables


def best_match_oracle(query_vec, nodes: list[tuple[int, list[float]]], tau: float):
    """Brute-force argmax cosine with oldest-id tie break and threshold."""
    best_id, best_sim = None, -1.0
    for node_id, vec in sorted(nodes):
        sim = sum(a * b for a, b in zip(query_vec, vec))
        if sim > best_sim:
            best_id, best_sim = node_id, sim
    if best_id is not None and best_sim >= tau:
        return best_id
    return None
