from __future__ import annotations

import random

import pytest

from kgtopo.errors import TaskMismatchError
from kgtopo.evaluation import (
    compare_head_modes,
    evaluate_run,
    hits_at_k,
    match_entity,
    render_comparison_table,
    render_report_table,
    report_to_csv,
)
from kgtopo.graphs import MissingSlot, QueryTask
from kgtopo.predictor import PredictionRecord
from kgtopo.prompts import RankedAnswer


def record(
    gold: str,
    candidates: list[str] | None,
    variant: str = "vanilla",
    mode: str = "tail",
    task_id: str = "t",
) -> PredictionRecord:
    answer = (
        RankedAnswer(candidates=candidates, raw_response="") if candidates is not None else None
    )
    return PredictionRecord(
        task=QueryTask(task_id, "r", MissingSlot.TAIL, gold=gold),
        variant=variant,
        mode=mode,
        answer=answer,
        error=None if candidates is not None else "ParseFailureError: x",
    )


class TestMatchEntity:
    def test_case_fold(self):
        assert match_entity("United Kingdom", "united kingdom")

    def test_no_aliasing(self):
        assert not match_entity("UK", "United Kingdom")

    def test_trim(self):
        assert match_entity("  Paris ", "Paris")

    def test_internal_whitespace_collapsed(self):
        assert match_entity("New  York", "New York")


class TestHitsAtK:
    def test_rank_one(self):
        r = record("gold", ["gold", "x"])
        assert hits_at_k(r, 1)

    def test_rank_four_thresholds(self):
        r = record("gold", ["a", "b", "c", "gold"])
        assert not hits_at_k(r, 3)
        assert hits_at_k(r, 10)

    def test_parse_failure_is_miss(self):
        r = record("gold", None)
        assert not hits_at_k(r, 1) and not hits_at_k(r, 10)

    def test_missing_gold_is_miss(self):
        r = record("gold", ["gold"])
        r.task = QueryTask("t", "r", MissingSlot.TAIL, gold=None)
        assert not hits_at_k(r, 1)


class TestEvaluateRun:
    def test_gold_always_rank_two(self):
        records = [record("g", ["other", "g"], task_id=f"t{i}") for i in range(10)]
        report = evaluate_run(records)
        row = report.rows[0]
        assert (row.hits1, row.hits3, row.hits10) == (0.0, 1.0, 1.0)
        assert row.n_tasks == 10
        assert row.n_parse_failures == 0

    def test_forty_percent_rank_two(self):
        records = []
        for i in range(500):
            if i % 5 < 2:  # 40% of tasks
                records.append(record("g", ["miss", "g"], task_id=f"t{i}"))
            else:
                records.append(record("g", [f"w{j}" for j in range(10)], task_id=f"t{i}"))
        report = evaluate_run(records)
        row = report.rows[0]
        assert row.hits1 == 0.0
        assert row.hits3 == pytest.approx(0.4)
        assert row.hits10 == pytest.approx(0.4)

    def test_empty_run(self):
        assert evaluate_run([]).rows == []

    def test_groups_by_variant_and_mode(self):
        records = [
            record("g", ["g"], variant="vanilla", mode="tail"),
            record("g", ["x"], variant="vanilla", mode="head-direct"),
            record("g", ["g"], variant="ontology", mode="tail"),
        ]
        report = evaluate_run(records)
        assert [(r.variant, r.mode) for r in report.rows] == [
            ("ontology", "tail"),
            ("vanilla", "head-direct"),
            ("vanilla", "tail"),
        ]

    def test_permutation_invariance(self):
        rng = random.Random(8)
        records = [
            record("g", rng.choice([["g"], ["x", "g"], ["x"], None]), task_id=f"t{i}")
            for i in range(50)
        ]
        base = evaluate_run(records).to_dicts()
        for _ in range(5):
            rng.shuffle(records)
            assert evaluate_run(records).to_dicts() == base

    def test_monotonicity_on_random_sets(self):
        rng = random.Random(2)
        for _ in range(1000):
            records = []
            for i in range(rng.randrange(1, 12)):
                pool = [f"c{j}" for j in range(10)]
                rng.shuffle(pool)
                if rng.random() < 0.5:
                    pool[rng.randrange(10)] = "g"
                records.append(record("g", pool[: rng.randrange(1, 11)], task_id=f"t{i}"))
            row = evaluate_run(records).rows[0]
            assert row.hits1 <= row.hits3 <= row.hits10

    def test_hand_tally_on_small_fixture(self):
        # independent per-record tally, then compare
        layout = [(1, True), (2, True), (4, False), (None, False), (11, False)]
        records = []
        for i, (rank, _) in enumerate(layout):
            if rank is None:
                records.append(record("g", None, task_id=f"t{i}"))
            else:
                candidates = [f"w{j}" for j in range(rank - 1)] + ["g"]
                records.append(record("g", candidates[:10] if rank <= 10 else [f"w{j}" for j in range(10)], task_id=f"t{i}"))
        hits1 = sum(1 for rank, _ in layout if rank == 1) / len(layout)
        hits3 = sum(1 for rank, _ in layout if rank and rank <= 3) / len(layout)
        hits10 = sum(1 for rank, _ in layout if rank and rank <= 10) / len(layout)
        row = evaluate_run(records).rows[0]
        assert (row.hits1, row.hits3, row.hits10) == (hits1, hits3, hits10)
        assert row.n_parse_failures == 1


def head_record(task_id: str, gold: str, candidates: list[str] | None, mode: str):
    answer = RankedAnswer(candidates=candidates, raw_response="") if candidates else None
    return PredictionRecord(
        task=QueryTask(task_id, "r", MissingSlot.HEAD, gold=gold),
        variant="vanilla",
        mode=mode,
        answer=answer,
    )


class TestCompareHeadModes:
    def test_identical_runs_fully_agree(self):
        direct = [head_record(f"t{i}", "g", ["g"], "head-direct") for i in range(4)]
        inverse = [head_record(f"t{i}", "g", ["g"], "head-inverse") for i in range(4)]
        cmp = compare_head_modes(direct, inverse)
        for row in cmp.rows:
            assert row.direct_correct == row.inverse_correct == row.agreement == 4

    def test_disjoint_correctness_no_agreement(self):
        direct = [
            head_record("t1", "g", ["g"], "head-direct"),
            head_record("t2", "g", ["x"], "head-direct"),
        ]
        inverse = [
            head_record("t1", "g", ["x"], "head-inverse"),
            head_record("t2", "g", ["g"], "head-inverse"),
        ]
        cmp = compare_head_modes(direct, inverse)
        row1 = cmp.rows[0]
        assert (row1.direct_correct, row1.inverse_correct, row1.agreement) == (1, 1, 0)

    def test_task_mismatch(self):
        direct = [head_record("t1", "g", ["g"], "head-direct")]
        inverse = [head_record("t2", "g", ["g"], "head-inverse")]
        with pytest.raises(TaskMismatchError):
            compare_head_modes(direct, inverse)

    def test_twenty_task_fixture_matches_hand_tally(self):
        rng = random.Random(77)
        direct, inverse = [], []
        direct_ranks, inverse_ranks = {}, {}
        for i in range(20):
            tid = f"t{i}"
            dr = rng.choice([1, 2, 4, 11, None])
            ir = rng.choice([1, 2, 4, 11, None])
            direct_ranks[tid], inverse_ranks[tid] = dr, ir

            def mk(rank, mode):
                if rank is None:
                    return head_record(tid, "g", None, mode)
                pool = [f"w{j}" for j in range(10)]
                if rank <= 10:
                    pool[rank - 1] = "g"
                return head_record(tid, "g", pool, mode)

            direct.append(mk(dr, "head-direct"))
            inverse.append(mk(ir, "head-inverse"))
        cmp = compare_head_modes(direct, inverse)
        for row in cmp.rows:
            expect_direct = sum(
                1 for r in direct_ranks.values() if r is not None and r <= row.k
            )
            expect_inverse = sum(
                1 for r in inverse_ranks.values() if r is not None and r <= row.k
            )
            expect_agree = sum(
                1
                for tid in direct_ranks
                if direct_ranks[tid] is not None
                and direct_ranks[tid] <= row.k
                and inverse_ranks[tid] is not None
                and inverse_ranks[tid] <= row.k
            )
            assert (row.direct_correct, row.inverse_correct, row.agreement) == (
                expect_direct,
                expect_inverse,
                expect_agree,
            )


class TestRendering:
    def test_table_contains_rows(self):
        report = evaluate_run([record("g", ["g"]), record("g", ["x"], task_id="t2")])
        table = render_report_table(report)
        assert "vanilla" in table and "hits@1" in table

    def test_csv_shape(self):
        report = evaluate_run([record("g", ["g"])])
        csv_text = report_to_csv(report)
        lines = csv_text.strip().splitlines()
        assert lines[0].startswith("variant,mode,n_tasks")
        assert len(lines) == 2

    def test_comparison_table(self):
        direct = [head_record("t1", "g", ["g"], "head-direct")]
        inverse = [head_record("t1", "g", ["g"], "head-inverse")]
        table = render_comparison_table(compare_head_modes(direct, inverse))
        assert "direct correct" in table and "(1 tasks)" in table
