"""Report rendering for experiment results: JSON, text table, CSV, and
matplotlib figures written next to the delimited output.

Given the same records, every artifact here is byte-identical across runs;
ordering is pinned by task id and monetary values stay exact.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

from .evalharness import EvalRecord, ExperimentResult, aggregate

METRIC_COLUMNS = ("STR (lenient)", "STR (strict)", "ECR", "ICR", "SER")


def format_usd(value: Fraction) -> str:
    """Exact decimal text for terminating fractions, p/q otherwise."""
    num, den = value.numerator, value.denominator
    d, twos, fives = den, 0, 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{num}/{den}"
    digits = max(twos, fives, 2)
    scaled = abs(num) * (10**digits) // den
    text = str(scaled).rjust(digits + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def _record_row(record: EvalRecord) -> dict:
    return {
        "task_id": record.task_id,
        "generated": [list(t) for t in record.generated],
        "success": record.success,
        "success_strict": record.success_strict,
        "excessive": record.excessive,
        "insufficient": record.insufficient,
        "syntax_error": record.syntax_error,
        "latency_ms": round(record.latency_ms, 3),
        "cost_usd": format_usd(record.cost_usd),
        "provider_calls": [list(t) for t in record.provider_calls],
        "total_calls": record.total_calls,
    }


def report_json(result: ExperimentResult) -> str:
    stats = aggregate(result.records)
    doc = {
        "mode": result.mode,
        "ablation": result.ablation,
        "tasks": stats["tasks"],
        "metrics": {
            "str_lenient_pct": stats["str_lenient_pct"],
            "str_strict_pct": stats["str_strict_pct"],
            "ecr_pct": stats["ecr_pct"],
            "icr_pct": stats["icr_pct"],
            "ser_pct": stats["ser_pct"],
        },
        "latency_ms_mean": round(stats["latency_ms_mean"], 3),
        "latency_basis": "wall-clock per session; with the scripted provider this is orchestration overhead only",
        "cost_usd_mean": format_usd(stats["cost_usd_mean"]),
        "cost_usd_total": format_usd(result.total_cost),
        "provider_calls_mean": round(stats["provider_calls_mean"], 3),
        "provider_calls_total": result.total_calls,
        "records": [_record_row(r) for r in sorted(result.records, key=lambda r: r.task_id)],
    }
    return json.dumps(doc, indent=2) + "\n"


def report_table(result: ExperimentResult) -> str:
    stats = aggregate(result.records)
    values = (
        stats["str_lenient_pct"],
        stats["str_strict_pct"],
        stats["ecr_pct"],
        stats["icr_pct"],
        stats["ser_pct"],
    )
    lines = [
        f"run: mode={result.mode} ablation={result.ablation} tasks={stats['tasks']}",
        "",
        " | ".join(f"{name:>13}" for name in METRIC_COLUMNS),
        " | ".join(f"{v:>12.2f}%" for v in values),
        "",
        f"latency (mean): {stats['latency_ms_mean']:.1f} ms",
        f"cost (mean):    {format_usd(stats['cost_usd_mean'])} USD",
        f"cost (total):   {format_usd(result.total_cost)} USD",
        f"provider calls: {result.total_calls} total, "
        f"{stats['provider_calls_mean']:.2f} per task",
    ]
    return "\n".join(lines) + "\n"


def report_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "task_id",
            "success",
            "success_strict",
            "excessive",
            "insufficient",
            "syntax_error",
            "latency_ms",
            "cost_usd",
            "total_calls",
        ]
    )
    for r in sorted(result.records, key=lambda r: r.task_id):
        writer.writerow(
            [
                r.task_id,
                int(r.success),
                int(r.success_strict),
                int(r.excessive),
                int(r.insufficient),
                int(r.syntax_error),
                f"{r.latency_ms:.3f}",
                format_usd(r.cost_usd),
                r.total_calls,
            ]
        )
    return buf.getvalue()


def render_figures(result: ExperimentResult, out_dir: Path) -> list[Path]:
    """Bar charts for the accuracy metrics and the efficiency numbers."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stats = aggregate(result.records)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    values = [
        stats["str_lenient_pct"],
        stats["str_strict_pct"],
        stats["ecr_pct"],
        stats["icr_pct"],
        stats["ser_pct"],
    ]
    ax.bar(METRIC_COLUMNS, values, color=["#2a9d8f", "#287271", "#e9c46a", "#f4a261", "#e76f51"])
    ax.set_ylabel("% of tasks")
    ax.set_ylim(0, 100)
    ax.set_title(f"Accuracy metrics ({result.mode}, {result.ablation})")
    for idx, value in enumerate(values):
        ax.text(idx, value + 1.5, f"{value:.1f}", ha="center", fontsize=9)
    fig.tight_layout()
    path = out_dir / "metrics.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(1, 3, figsize=(9, 3.2))
    axes[0].bar(["latency"], [stats["latency_ms_mean"]], color="#264653")
    axes[0].set_ylabel("ms per task")
    axes[1].bar(["cost"], [float(stats["cost_usd_mean"])], color="#2a9d8f")
    axes[1].set_ylabel("USD per task")
    axes[2].bar(["calls"], [stats["provider_calls_mean"]], color="#e9c46a")
    axes[2].set_ylabel("provider calls per task")
    fig.suptitle(f"Efficiency ({result.mode}, {result.ablation})")
    fig.tight_layout()
    path = out_dir / "efficiency.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def emit_report(
    result: ExperimentResult,
    fmt: str = "table",
    out_dir: str | Path | None = None,
) -> str:
    """Render the report; with out_dir, also write JSON + CSV + figures."""
    if fmt == "json":
        artifact = report_json(result)
    elif fmt == "table":
        artifact = report_table(result)
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = f"report-{result.mode}-{result.ablation}"
        (out / f"{name}.json").write_text(report_json(result))
        (out / f"{name}.csv").write_text(report_csv(result))
        (out / f"{name}.txt").write_text(report_table(result))
        render_figures(result, out)
    return artifact
