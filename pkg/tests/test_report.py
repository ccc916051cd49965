from __future__ import annotations

from ilrace.abstraction import AbstractState, AccessRecord
from ilrace.analysis import summarize_program
from ilrace.lang import parse_expr, parse_program
from ilrace.report import RELAXED, STRICT, candidates, report, stable

REC = AccessRecord


def _st(accesses=(), wobbly=()):
    return AbstractState(
        frozenset(parse_expr(w) for w in wobbly), 0,
        frozenset(accesses),
    )


# -- candidates -----------------------------------------------------------------


def test_read_write_same_field_seq_is_candidate():
    s1 = _st([REC("read", parse_expr("arg1.dee"), 1)])
    s2 = _st([REC("write", parse_expr("arg1.dee"), 0)])
    assert len(candidates(s1, s2)) == 1


def test_different_field_seqs_not_candidates():
    s1 = _st([REC("write", parse_expr("arg1.f"), 0)])
    s2 = _st([REC("read", parse_expr("arg2.x.g"), 0)])
    assert candidates(s1, s2) == []


def test_roots_may_differ():
    s1 = _st([REC("write", parse_expr("arg1.f"), 0)])
    s2 = _st([REC("read", parse_expr("arg2.f"), 0)])
    assert len(candidates(s1, s2)) == 1


def test_self_pair_write_write_is_candidate():
    s = _st([REC("write", parse_expr("arg1.f"), 0)])
    assert len(candidates(s, s)) == 1


def test_read_read_never_candidates():
    s = _st([REC("read", parse_expr("arg1.f"), 0)])
    assert candidates(s, s) == []


# -- stability --------------------------------------------------------------------


def test_wobbly_root_destabilizes():
    assert not stable(parse_expr("arg1.f"), frozenset({parse_expr("arg1")}))


def test_path_itself_wobbly_is_fine():
    assert stable(parse_expr("arg1.f"), frozenset({parse_expr("arg1.f")}))


def test_proper_prefix_destabilizes():
    assert not stable(parse_expr("arg1.g.f"), frozenset({parse_expr("arg1.g")}))


def test_unrelated_wobbles_ignored():
    assert stable(parse_expr("arg1.f"), frozenset({parse_expr("arg2"),
                                                   parse_expr("arg1.f.g")}))


# -- fixture reports ---------------------------------------------------------------


def test_dodo_reports(dodo):
    table = summarize_program(dodo)
    reps = report(dodo, table, STRICT)
    keys = {(r.method1, r.method2, r.access1.kind, r.access2.kind) for r in reps}
    assert keys == {
        ("zup", "zap", "write", "read"),
        ("zup", "zup", "write", "write"),
    }
    cross = next(r for r in reps if r.method2 == "zap")
    assert cross.access1.lock == 0 and cross.access2.lock == 1
    assert cross.field_seq == ("dee",)


def test_burble_reports(burble):
    table = summarize_program(burble)
    reps = report(burble, table, STRICT)
    pairs = {(r.method1, r.method2) for r in reps}
    assert ("reps", "meps") in pairs  # write normalized into slot 1
    assert ("reps", "reps") in pairs
    assert not any("beps" in pair for pair in pairs)


def test_wurble_reports(wurble):
    table = summarize_program(wurble)
    assert report(wurble, table, STRICT) == []
    assert report(wurble, table, RELAXED) == []


def test_entry_restriction(burble):
    table = summarize_program(burble)
    reps = report(burble, table, STRICT, entries=("meps", "beps"))
    assert reps == []


# -- lock conditions ----------------------------------------------------------------


def test_strict_lock_budget_vs_relaxed():
    p = parse_program(
        "method deep(arg1){ lock(); lock(); x := arg1.f; unlock(); unlock(); }"
        "method writer(arg1){ y := new(); arg1.f := y; }"
    )
    table = summarize_program(p)
    strict = report(p, table, STRICT)
    relaxed = report(p, table, RELAXED)
    strict_pairs = {(r.method1, r.method2) for r in strict}
    relaxed_pairs = {(r.method1, r.method2) for r in relaxed}
    assert ("writer", "deep") not in strict_pairs  # 0 + 2 > 1
    assert ("writer", "deep") in relaxed_pairs  # min(0, 2) = 0
    assert {r.key() for r in strict} <= {r.key() for r in relaxed}


def test_both_locked_reported_nowhere():
    p = parse_program(
        "method a(arg1){ lock(); y := new(); arg1.f := y; unlock(); }"
        "method b(arg1){ lock(); x := arg1.f; unlock(); }"
    )
    table = summarize_program(p)
    assert report(p, table, STRICT) == []
    assert report(p, table, RELAXED) == []


# -- hygiene ----------------------------------------------------------------


def test_reports_deterministic(burble):
    table = summarize_program(burble)
    r1 = [r.key() for r in report(burble, table, STRICT)]
    r2 = [r.key() for r in report(burble, table, STRICT)]
    assert r1 == r2 == sorted(r1)


def test_no_local_rooted_paths_in_reports(corpus):
    for p in corpus[:50]:
        table = summarize_program(p)
        for r in report(p, table, RELAXED):
            assert r.access1.path.root.is_formal
            assert r.access2.path.root.is_formal
            assert r.access1.kind == "write"  # slot 1 holds the write


def test_json_shape(dodo):
    table = summarize_program(dodo)
    [cross, selfpair] = report(dodo, table, STRICT)
    d = cross.to_json_dict()
    assert set(d) == {"method1", "method2", "path1", "path2",
                      "kind1", "kind2", "lock1", "lock2", "mode"}
    assert d["path1"] == "arg1.dee" and d["mode"] == "strict"
