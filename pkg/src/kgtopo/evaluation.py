"""Hits@k scoring, head-mode comparison, and report tables.

Every task in a run counts toward the denominator: records whose answer
could not be parsed score as misses. Matching is normalized-exact (trim,
collapse whitespace, casefold) with no alias table.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .errors import TaskMismatchError
from .predictor import PredictionRecord

REPORTED_KS = (1, 3, 10)


def match_entity(predicted: str, gold: str) -> bool:
    """Normalized-exact equality: trim, collapse whitespace, casefold."""
    return " ".join(predicted.split()).casefold() == " ".join(gold.split()).casefold()


def hits_at_k(record: PredictionRecord, k: int) -> bool:
    """True iff the gold entity matches one of the first k candidates."""
    if record.task.gold is None or record.answer is None:
        return False
    return any(
        match_entity(candidate, record.task.gold)
        for candidate in record.answer.candidates[:k]
    )


@dataclass(frozen=True, slots=True)
class EvalRow:
    variant: str
    mode: str
    n_tasks: int
    hits1: float
    hits3: float
    hits10: float
    n_parse_failures: int


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def to_dicts(self) -> list[dict]:
        return [
            {
                "variant": r.variant,
                "mode": r.mode,
                "n_tasks": r.n_tasks,
                "hits1": r.hits1,
                "hits3": r.hits3,
                "hits10": r.hits10,
                "n_parse_failures": r.n_parse_failures,
            }
            for r in self.rows
        ]


def evaluate_run(records: Sequence[PredictionRecord]) -> EvalReport:
    """Hits@{1,3,10} per (variant, mode) group, over all tasks in the group."""
    groups: dict[tuple[str, str], list[PredictionRecord]] = {}
    for record in records:
        groups.setdefault((record.variant, record.mode), []).append(record)
    rows = []
    for (variant, mode), group in sorted(groups.items()):
        n = len(group)
        hit_counts = {k: sum(1 for r in group if hits_at_k(r, k)) for k in REPORTED_KS}
        rows.append(
            EvalRow(
                variant=variant,
                mode=mode,
                n_tasks=n,
                hits1=hit_counts[1] / n,
                hits3=hit_counts[3] / n,
                hits10=hit_counts[10] / n,
                n_parse_failures=sum(1 for r in group if r.answer is None),
            )
        )
    return EvalReport(rows=rows)


@dataclass(frozen=True, slots=True)
class HeadModeRow:
    k: int
    direct_correct: int
    inverse_correct: int
    agreement: int


@dataclass
class HeadModeComparison:
    n_tasks: int
    rows: list[HeadModeRow]


def _task_key(record: PredictionRecord) -> tuple:
    t = record.task
    return (t.known_entity, t.relation, t.missing_slot.value, t.gold)


def compare_head_modes(
    direct: Sequence[PredictionRecord], inverse: Sequence[PredictionRecord]
) -> HeadModeComparison:
    """Correct-prediction counts of direct vs inverse head prediction.

    Both runs must cover the same tasks. ``agreement`` counts tasks both
    modes got right at the same k.
    """
    direct_by_task = {_task_key(r): r for r in direct}
    inverse_by_task = {_task_key(r): r for r in inverse}
    if set(direct_by_task) != set(inverse_by_task):
        only_direct = len(set(direct_by_task) - set(inverse_by_task))
        only_inverse = len(set(inverse_by_task) - set(direct_by_task))
        raise TaskMismatchError(
            f"runs cover different tasks ({only_direct} only in direct, "
            f"{only_inverse} only in inverse)"
        )
    rows = []
    for k in REPORTED_KS:
        direct_correct = inverse_correct = agreement = 0
        for key, direct_record in direct_by_task.items():
            d = hits_at_k(direct_record, k)
            i = hits_at_k(inverse_by_task[key], k)
            direct_correct += d
            inverse_correct += i
            agreement += d and i
        rows.append(HeadModeRow(k, direct_correct, inverse_correct, agreement))
    return HeadModeComparison(n_tasks=len(direct_by_task), rows=rows)


def render_report_table(report: EvalReport) -> str:
    """Aligned plain-text table of an evaluation report."""
    headers = ["variant", "mode", "n", "hits@1", "hits@3", "hits@10", "failures"]
    body = [
        [
            r.variant,
            r.mode,
            str(r.n_tasks),
            f"{r.hits1:.3f}",
            f"{r.hits3:.3f}",
            f"{r.hits10:.3f}",
            str(r.n_parse_failures),
        ]
        for r in report.rows
    ]
    return _tabulate(headers, body)


def render_comparison_table(cmp: HeadModeComparison) -> str:
    headers = ["k", "direct correct", "inverse correct", "agreement"]
    body = [
        [str(r.k), str(r.direct_correct), str(r.inverse_correct), str(r.agreement)]
        for r in cmp.rows
    ]
    return _tabulate(headers, body) + f"\n({cmp.n_tasks} tasks)"


def report_to_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["variant", "mode", "n_tasks", "hits1", "hits3", "hits10", "n_parse_failures"]
    )
    for r in report.rows:
        writer.writerow(
            [r.variant, r.mode, r.n_tasks, f"{r.hits1:.6f}", f"{r.hits3:.6f}",
             f"{r.hits10:.6f}", r.n_parse_failures]
        )
    return buffer.getvalue()


def _tabulate(headers: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
