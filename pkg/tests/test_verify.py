"""History checker: rule-by-rule negatives, conservatism on races,
and a brute-force feasibility cross-check on tiny histories."""

import random

import pytest

from lftree.verify import (
    INSERT,
    REMOVE,
    SEARCH,
    OpRecord,
    SetOracle,
    TraceError,
    check_history,
    progress_audit,
    read_trace,
    snapshot_consistent,
    write_trace,
)
from reference import PlainSetModel, feasible


def rules(records):
    return {v.rule for v in check_history(records)}


# --- sequential oracle --------------------------------------------------


def test_oracle_point_calls_default_to_single_key():
    o = SetOracle([3, 7])
    assert o.search(3) == 3
    assert o.search(4) == 0
    assert o.remove(7) == 7
    assert o.remove(7) == 0
    assert o.keys() == [3]


def test_oracle_range_answers_smallest():
    o = SetOracle([10, 20, 30])
    assert o.search(11, 25) == 20
    assert o.remove(5, 50) == 10
    assert o.apply(SEARCH, 5, 50) == 20
    with pytest.raises(ValueError):
        o.apply("DROP", 1, 1)


# --- malformed records --------------------------------------------------


@pytest.mark.parametrize("record,detail", [
    (OpRecord(0, "DELETE", 1, 1, 0, 1, 0), "unknown kind"),
    (OpRecord(0, SEARCH, 1, 1, 5, 5, 0), "not after invocation"),
    (OpRecord(0, SEARCH, 3, 2, 0, 1, 0), "bad key range"),
    (OpRecord(0, SEARCH, 0, 2, 0, 1, 0), "bad key range"),
    (OpRecord(0, INSERT, 1, 2, 0, 1, 1), "e1 == e2"),
    (OpRecord(0, INSERT, 1, 1, 0, 1, 2), "result must be 0 or 1"),
    (OpRecord(0, REMOVE, 1, 1, 0, 1, -1), "negative result"),
], ids=["kind", "times", "range", "key-zero", "insert-range",
        "insert-result", "negative"])
def test_malformed_records_are_flagged(record, detail):
    out = check_history([record])
    assert [v.rule for v in out] == ["malformed-record"]
    assert detail in out[0].detail


def test_malformed_record_does_not_poison_the_rest():
    # the bad row is reported, the good rows are still checked
    recs = [
        OpRecord(0, "DELETE", 1, 1, 0, 1, 0),
        OpRecord(1, INSERT, 5, 5, 0, 1, 1),
        OpRecord(1, SEARCH, 5, 5, 2, 3, 5),
    ]
    assert rules(recs) == {"malformed-record"}


def test_overlapping_ops_on_one_thread():
    recs = [
        OpRecord(0, SEARCH, 1, 1, 0, 10, 0),
        OpRecord(0, SEARCH, 1, 1, 5, 15, 0),
    ]
    assert rules(recs) == {"overlapping-thread-ops"}
    # same interval on different threads is concurrency, not malformation
    recs[1] = OpRecord(1, SEARCH, 1, 1, 5, 15, 0)
    assert rules(recs) == set()


# --- one minimal history per semantic rule ------------------------------


def test_failed_search_over_certain_presence():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 10, 1),
        OpRecord(1, SEARCH, 1, 9, 20, 30, 0),
    ]
    out = check_history(recs)
    assert [v.rule for v in out] == ["failed-search-certain-match"]
    assert "5 was present throughout" in out[0].detail


@pytest.mark.parametrize("kind", [SEARCH, REMOVE])
def test_result_outside_requested_range(kind):
    recs = [
        OpRecord(0, INSERT, 7, 7, 0, 1, 1),
        OpRecord(1, kind, 1, 5, 2, 3, 7),
    ]
    assert "result-outside-range" in rules(recs)


def test_search_result_never_present():
    recs = [OpRecord(0, SEARCH, 1, 9, 0, 10, 5)]
    assert rules(recs) == {"search-result-never-present"}


def test_failed_remove_over_certain_presence():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 10, 1),
        OpRecord(1, REMOVE, 1, 9, 20, 30, 0),
    ]
    assert rules(recs) == {"failed-remove-certain-match"}


def test_remove_result_never_present():
    recs = [OpRecord(0, REMOVE, 1, 9, 0, 10, 5)]
    # the phantom key also breaks insert/remove pairing
    assert rules(recs) == {"remove-result-never-present", "remove-unpaired"}


def test_remove_skipping_a_certainly_smaller_key():
    recs = [
        OpRecord(0, INSERT, 3, 3, 0, 1, 1),
        OpRecord(0, INSERT, 5, 5, 2, 3, 1),
        OpRecord(1, REMOVE, 1, 9, 10, 20, 5),
    ]
    out = check_history(recs)
    assert [v.rule for v in out] == ["remove-not-minimal"]
    assert "3 < 5" in out[0].detail


def test_insert_claiming_success_over_certain_presence():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(1, INSERT, 5, 5, 10, 20, 1),
    ]
    assert rules(recs) == {"insert-over-certain-present"}


def test_failed_insert_with_nothing_to_collide_with():
    recs = [OpRecord(0, INSERT, 5, 5, 0, 10, 0)]
    assert rules(recs) == {"failed-insert-never-present"}


def test_more_removes_than_insert_lifetimes():
    # the two removes overlap, so neither interval alone is provably wrong;
    # only the pairing argument catches the duplicate
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(1, REMOVE, 5, 5, 2, 10, 5),
        OpRecord(2, REMOVE, 5, 5, 3, 9, 5),
    ]
    out = check_history(recs)
    assert [v.rule for v in out] == ["remove-unpaired"]
    assert "2 removes of 5" in out[0].detail


# --- races the checker must not second-guess ----------------------------


def test_search_concurrent_with_insert_may_go_either_way():
    ins = OpRecord(0, INSERT, 5, 5, 0, 100, 1)
    assert check_history([ins, OpRecord(1, SEARCH, 1, 9, 50, 60, 0)]) == []
    assert check_history([ins, OpRecord(1, SEARCH, 1, 9, 50, 60, 5)]) == []


def test_concurrent_remove_and_search_may_both_report_the_key():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(1, REMOVE, 1, 9, 10, 20, 5),
        OpRecord(2, SEARCH, 1, 9, 11, 19, 5),
    ]
    assert check_history(recs) == []


# --- random histories vs the brute-force feasibility oracle -------------


def _serial_history(rng, length, top=4):
    """Non-overlapping ops with results from the reference model."""
    model = PlainSetModel()
    recs = []
    t = 0
    for i in range(length):
        kind = rng.choice((SEARCH, REMOVE, INSERT))
        e1 = rng.randint(1, top)
        e2 = e1 if kind == INSERT else rng.randint(e1, top)
        t1 = t + rng.randint(0, 2)
        t2 = t1 + 1 + rng.randint(0, 2)
        t = t2
        recs.append(OpRecord(i % 3, kind, e1, e2, t1, t2,
                             model.apply(kind, e1, e2)))
    return recs, sorted(model.keys)


def _overlapping_intervals(rng, length):
    """Per-thread sequential (t1, t2) windows that interleave across
    threads."""
    clocks = [rng.randint(0, 4) for _ in range(3)]
    spans = []
    for i in range(length):
        tid = i % 3
        t1 = clocks[tid] + rng.randint(0, 2)
        t2 = t1 + 1 + rng.randint(0, 5)
        clocks[tid] = t2
        spans.append((tid, t1, t2))
    return spans


def test_serial_model_histories_are_never_flagged():
    rng = random.Random(11)
    for _ in range(200):
        recs, snap = _serial_history(rng, rng.randint(4, 12))
        assert check_history(recs) == []
        assert snapshot_consistent(recs, snap) == []


def test_feasible_concurrent_histories_are_never_flagged():
    # replaying in invocation order is consistent with real time, so
    # results drawn that way always have a serial explanation
    rng = random.Random(12)
    for _ in range(200):
        spans = _overlapping_intervals(rng, rng.randint(3, 6))
        model = PlainSetModel()
        recs = []
        for tid, t1, t2 in sorted(spans, key=lambda s: s[1]):
            kind = rng.choice((SEARCH, REMOVE, INSERT))
            e1 = rng.randint(1, 3)
            e2 = e1 if kind == INSERT else rng.randint(e1, 3)
            recs.append(OpRecord(tid, kind, e1, e2, t1, t2,
                                 model.apply(kind, e1, e2)))
        assert check_history(recs) == []
        assert feasible(recs)


def test_flagged_histories_are_truly_infeasible():
    """Soundness on random results: whenever the conservative checker
    objects, no serial order explains the history. The converse is not
    expected; the structure is not linearizable."""
    rng = random.Random(13)
    flagged = passed = 0
    for _ in range(300):
        spans = _overlapping_intervals(rng, rng.randint(3, 6))
        recs = []
        for tid, t1, t2 in spans:
            kind = rng.choice((SEARCH, REMOVE, INSERT))
            e1 = rng.randint(1, 3)
            if kind == INSERT:
                e2, result = e1, rng.randint(0, 1)
            else:
                e2 = rng.randint(e1, 3)
                result = rng.choice([0] + list(range(e1, e2 + 1)))
            recs.append(OpRecord(tid, kind, e1, e2, t1, t2, result))
        if check_history(recs):
            flagged += 1
            assert not feasible(recs)
        else:
            passed += 1
    # the sweep is only meaningful if both outcomes occur
    assert flagged > 20 and passed > 20


# --- snapshot reconciliation --------------------------------------------


def test_snapshot_matches_net_inserts():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(0, INSERT, 8, 8, 2, 3, 1),
        OpRecord(0, REMOVE, 5, 5, 4, 5, 5),
        OpRecord(0, INSERT, 8, 8, 6, 7, 0),
        OpRecord(0, SEARCH, 8, 8, 8, 9, 8),
    ]
    assert snapshot_consistent(recs, [8]) == []


@pytest.mark.parametrize("snapshot,needle", [
    ([], "inserted but missing"),
    ([5, 7], "never inserted"),
    ([5, 5], "duplicates"),
], ids=["missing", "phantom", "dupes"])
def test_snapshot_mismatches(snapshot, needle):
    recs = [OpRecord(0, INSERT, 5, 5, 0, 1, 1)]
    problems = snapshot_consistent(recs, snapshot)
    assert any(needle in p for p in problems)


def test_snapshot_flags_removed_key_still_present():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(0, REMOVE, 5, 5, 2, 3, 5),
    ]
    assert any("removed but still" in p
               for p in snapshot_consistent(recs, [5]))


def test_snapshot_flags_double_insert_accounting():
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 1, 1),
        OpRecord(1, INSERT, 5, 5, 0, 1, 1),
    ]
    assert any("2 net inserts" in p for p in snapshot_consistent(recs, [5]))


# --- starvation screen --------------------------------------------------


def test_progress_audit_flags_slow_op_and_silent_span():
    recs = [
        OpRecord(0, SEARCH, 1, 1, 0, 100, 0),
        OpRecord(1, SEARCH, 1, 1, 90, 1000, 0),
    ]
    reports = progress_audit(recs, 500)
    assert any("op ran 910 > 500" in r for r in reports)
    assert any("no response between 100 and 1000" in r for r in reports)


def test_progress_audit_ignores_gaps_with_nothing_in_flight():
    recs = [
        OpRecord(0, SEARCH, 1, 1, 0, 100, 0),
        OpRecord(0, SEARCH, 1, 1, 800, 900, 0),
    ]
    assert progress_audit(recs, 500) == []


def test_progress_audit_quiet_on_steady_throughput():
    recs = [OpRecord(0, SEARCH, 1, 1, 10 * i, 10 * i + 8, 0)
            for i in range(50)]
    assert progress_audit(recs, 50) == []


# --- trace files --------------------------------------------------------


def test_trace_round_trip(tmp_path):
    path = tmp_path / "ops.trace"
    recs = [
        OpRecord(0, INSERT, 5, 5, 0, 3, 1),
        OpRecord(1, SEARCH, 1, 9, 2, 7, 5),
        OpRecord(2, REMOVE, 1, 9, 8, 11, 5),
    ]
    write_trace(path, recs, comment="tiny run")
    text = path.read_text()
    assert text.startswith("# tiny run\n")
    assert read_trace(path) == recs


def test_trace_reader_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "ops.trace"
    path.write_text("# header\n\n0\tSEARCH\t1\t1\t0\t1\t0\n\n")
    assert len(read_trace(path)) == 1


def test_trace_reader_reports_column_count_with_line(tmp_path):
    path = tmp_path / "ops.trace"
    path.write_text("0\tSEARCH\t1\t1\t0\t1\t0\n"
                    "# fine\n"
                    "0\tSEARCH\t1\t1\t0\t1\n")
    with pytest.raises(TraceError, match=r":3: expected 7 columns, got 6"):
        read_trace(path)


def test_trace_reader_reports_bad_integer_with_line(tmp_path):
    path = tmp_path / "ops.trace"
    path.write_text("zero\tSEARCH\t1\t1\t0\t1\t0\n")
    with pytest.raises(TraceError, match=r":1:"):
        read_trace(path)
