from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from embedblock.evaluation import (
    UndefinedMetricError,
    evaluate_dedup,
    evaluate_query_run,
    pair_completeness,
    precision,
    reduction_ratio,
    sweep_rows,
)
from embedblock.pipelines import CandidatePair, QueryCandidate


def test_reduction_ratio_examples():
    assert reduction_ratio(0, 5) == 1.0
    assert reduction_ratio(4, 5) == 0.8
    assert reduction_ratio(20, 5) == 0.0


def test_reduction_ratio_clamps_with_warning():
    with pytest.warns(UserWarning):
        assert reduction_ratio(21, 5) == 0.0


def test_reduction_ratio_rejects_bad_input():
    with pytest.raises(ValueError):
        reduction_ratio(0, 1)
    with pytest.raises(ValueError):
        reduction_ratio(-1, 5)


def test_pair_completeness_examples():
    assert pair_completeness(500, 500) == 1.0
    assert pair_completeness(0, 500) == 0.0
    assert pair_completeness(375, 500) == 0.75
    with pytest.raises(UndefinedMetricError):
        pair_completeness(0, 0)


def test_precision_examples():
    assert precision(3, 0) == 1.0
    assert precision(0, 3) == 0.0
    assert precision(432, 48) == 0.9
    with pytest.raises(UndefinedMetricError):
        precision(0, 0)


@given(st.integers(2, 200), st.data())
def test_metrics_within_unit_interval(n, data):
    n_b = data.draw(st.integers(0, n * (n - 1)))
    assert 0.0 <= reduction_ratio(n_b, n) <= 1.0
    m = data.draw(st.integers(1, 100))
    assert 0.0 <= pair_completeness(data.draw(st.integers(0, m)), m) <= 1.0
    tp, fp = data.draw(st.integers(0, 50)), data.draw(st.integers(1, 50))
    assert 0.0 <= precision(tp, fp) <= 1.0


def test_evaluate_dedup_trivial_cases():
    truth = [("a", "b"), ("d", "c")]
    ev = evaluate_dedup(2, truth, truth, 4)
    assert ev.pc == 1.0 and ev.n_m == 2 and ev.m == 2
    assert evaluate_dedup(0, [], truth, 4).pc == 0.0


def test_evaluate_dedup_is_orientation_free():
    ev = evaluate_dedup(3, [CandidatePair("c", "d", 1), ("b", "a")], [("a", "b"), ("d", "c")], 10)
    assert ev.n_m == 2
    assert ev.rr == 1 - 3 / 90


def test_evaluate_query_run():
    def result(qid, *refs):
        return SimpleNamespace(
            query_id=qid,
            candidates=[QueryCandidate(r, 0, 1) for r in refs],
            total_seconds=0.5,
            timings={"distance": 0.1, "embed": 0.1, "search": 0.2, "filter": 0.1},
        )

    report = SimpleNamespace(results=[result("q1", "r1"), result("q2", "r9", "r2")], processed=2, elapsed=2.0)
    ev = evaluate_query_run(report, [("q1", "r1"), ("q2", "r2")])
    assert (ev.tp, ev.fp) == (2, 1)
    assert ev.precision == 2 / 3
    assert ev.tp_per_second == 1.0
    assert ev.recall == 1.0
    assert ev.mean_query_seconds == 0.5
    assert ev.mean_embed_seconds == pytest.approx(0.2)


def test_evaluate_query_run_empty_and_unknown():
    empty = evaluate_query_run(SimpleNamespace(results=[], processed=0, elapsed=0.0), [("q1", "r1")])
    assert empty.tp == empty.fp == 0 and empty.precision is None
    bad = SimpleNamespace(
        results=[SimpleNamespace(query_id="zz", candidates=[], total_seconds=0, timings={})],
        processed=1, elapsed=1.0,
    )
    with pytest.raises(KeyError):
        evaluate_query_run(bad, [("q1", "r1")])


def test_sweep_rows_sorted():
    evs = {50: evaluate_dedup(5, [], [("a", "b")], 10), 20: evaluate_dedup(2, [], [("a", "b")], 10)}
    assert [r["block_size"] for r in sweep_rows(evs)] == [20, 50]
