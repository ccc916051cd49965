from __future__ import annotations

import pytest

from ilrace.abstraction import AccessRecord
from ilrace.analysis import summarize_program
from ilrace.lang import Var, field_set, parse_expr, parse_program
from ilrace.report import STRICT, RaceReport, report
from ilrace.semantics import (
    Config,
    EnumBounds,
    eval_address,
    is_well_behaved,
    syntactic,
)
from ilrace.witness import (
    WitnessError,
    build_initial_state,
    find_access_prefix,
    is_acyclic,
    is_disconnected,
    path_footprint,
    reconstruct,
    replay_witness,
)

REC = AccessRecord


# -- the chain initial state --------------------------------------------------


def test_chain_single_field():
    cfg = build_initial_state(("f",), frozenset({"f"}), Var("arg1"), Var("arg1"))
    s1, s2 = cfg.stacks[0][0], cfg.stacks[1][0]
    assert s1.lookup("arg1") == s2.lookup("arg1") == 1
    assert s1.lookup("anything_else") == 0
    assert cfg.heap == {(0, "f"): 0, (1, "f"): 0}
    p = parse_expr("arg1.f")
    assert eval_address(p, s1, cfg.heap) == eval_address(p, s2, cfg.heap) == (1, "f")
    assert cfg.locks == (0, 0)


def test_chain_two_fields():
    cfg = build_initial_state(("f", "g"), frozenset({"f", "g"}),
                              Var("arg1"), Var("arg2"))
    h = cfg.heap
    assert h[(1, "f")] == 2 and h[(1, "g")] == 0
    assert h[(2, "f")] == 0 and h[(2, "g")] == 0
    s1, s2 = cfg.stacks[0][0], cfg.stacks[1][0]
    a1 = eval_address(parse_expr("arg1.f.g"), s1, h)
    a2 = eval_address(parse_expr("arg2.f.g"), s2, h)
    assert a1 == a2 == (2, "g")
    for path, frame in ((parse_expr("arg1.f.g"), s1), (parse_expr("arg2.f.g"), s2)):
        assert is_disconnected(path, frame, h)
        assert is_acyclic(path, frame, h)


def test_chain_states_always_well_behaved():
    for fs in (("f",), ("f", "g"), ("g", "g", "f")):
        cfg = build_initial_state(fs, frozenset({"f", "g", "h"}),
                                  Var("arg1"), Var("arg1"))
        assert is_well_behaved([cfg.stacks[0][0], cfg.stacks[1][0]], cfg.heap)


def test_universal_node_breaks_disconnectedness():
    # a path through the self-looping node is neither disconnected nor acyclic
    cfg = build_initial_state(("f",), frozenset({"f"}), Var("arg1"), Var("arg1"))
    other = parse_expr("other.f")  # rooted at the default location 0
    assert not is_disconnected(other, cfg.stacks[0][0], cfg.heap)
    assert not is_acyclic(other, cfg.stacks[0][0], cfg.heap)


def test_footprint_contents():
    cfg = build_initial_state(("f", "g"), frozenset({"f", "g"}),
                              Var("arg1"), Var("arg1"))
    fp = path_footprint(parse_expr("arg1.f.g"), cfg.stacks[0][0], cfg.heap)
    assert fp == {(1, "f"): 2, (2, "g"): 0}


# -- locating accesses -----------------------------------------------------------


def _setup(program, method, target_kind, target_path, target_lock):
    fields = field_set(program)
    cfg = build_initial_state(
        parse_expr(target_path).fields, fields, Var("arg1"), Var("arg1")
    )
    init = Config(cfg.stacks[0], cfg.heap, 0)
    target = REC(target_kind, parse_expr(target_path), target_lock)
    return find_access_prefix(
        program.method(method).body, init, target, program, fields
    )


def test_find_prefix_before_store(dodo):
    res = _setup(dodo, "zup", "write", "arg1.dee", 0)
    assert res is not None
    assert [str(c) for c in syntactic(res.prefix)] == ["skip", "y:=new()"]
    assert str(res.pending) == "arg1.dee:=y"
    assert res.addr == (1, "dee")


def test_find_prefix_ends_after_lock(dodo):
    res = _setup(dodo, "zap", "read", "arg1.dee", 1)
    assert res is not None
    assert [str(c) for c in syntactic(res.prefix)] == ["skip", "lock()"]
    assert res.addr == (1, "dee")


def test_find_prefix_absent_access(dodo):
    assert _setup(dodo, "zap", "write", "arg1.dee", 0) is None
    assert _setup(dodo, "zap", "read", "arg1.dee", 0) is None  # wrong lock


def test_find_prefix_inside_call(wurble):
    res = _setup(wurble, "qwop", "write", "arg1.x.g.f", 0)
    assert res is not None
    cmds = [str(c) for c in syntactic(res.prefix)]
    assert cmds[0] == "skip" and cmds[1] == "push(zwup;arg1.x)"
    assert str(res.pending) == "arg1.g.f:=z"  # callee-level command


# -- reconstruction -----------------------------------------------------------------


def _strict_reports(p):
    return report(p, summarize_program(p), STRICT)


def test_dodo_witness_schedule(dodo):
    fields = field_set(dodo)
    reps = _strict_reports(dodo)
    cross = next(r for r in reps if r.method2 == "zap")
    w = reconstruct(cross, dodo, fields)
    # the unlocked writer goes first, stopping before its store; then the
    # locked reader runs up to just after lock()
    assert [(which, str(c)) for which, c in w.schedule] == [
        (1, "skip"), (1, "y:=new()"), (2, "skip"), (2, "lock()"),
    ]
    assert w.racy_addr == (1, "dee")
    assert str(w.succ1) == "arg1.dee:=y" and str(w.succ2) == "x:=arg1.dee"
    evidence = replay_witness(w, fields)
    assert evidence.addr == (1, "dee")
    assert {evidence.kind1, evidence.kind2} == {"read", "write"}


def test_self_pair_witness(dodo):
    fields = field_set(dodo)
    selfpair = next(r for r in _strict_reports(dodo) if r.method2 == "zup")
    w = reconstruct(selfpair, dodo, fields)
    assert w.racy_addr == (1, "dee")
    # the two allocations pick distinct fresh locations
    news = [cmd for _, cmd in w.schedule if str(cmd) == "y:=new()"]
    assert len(news) == 2
    replay_witness(w, fields)


def test_burble_witness(burble):
    fields = field_set(burble)
    cross = next(
        r for r in _strict_reports(burble)
        if {r.method1, r.method2} == {"meps", "reps"}
    )
    w = reconstruct(cross, burble, fields)
    assert w.racy_addr == (1, "f")


def test_fabricated_report_fails_loudly(dodo):
    fake = RaceReport(
        "zap", "zup",
        REC("write", parse_expr("arg1.q"), 0),
        REC("write", parse_expr("arg1.q"), 0),
        STRICT,
    )
    with pytest.raises(WitnessError):
        reconstruct(fake, dodo, field_set(dodo))


def test_witness_replay_is_deterministic(dodo):
    fields = field_set(dodo)
    cross = next(r for r in _strict_reports(dodo) if r.method2 == "zap")
    w1 = reconstruct(cross, dodo, fields)
    w2 = reconstruct(cross, dodo, fields)
    assert w1 == w2
    assert replay_witness(w1, fields) == replay_witness(w2, fields)


def test_witness_serialization_shape(dodo):
    fields = field_set(dodo)
    cross = next(r for r in _strict_reports(dodo) if r.method2 == "zap")
    d = reconstruct(cross, dodo, fields).to_json_dict()
    assert set(d) == {"initial", "schedule", "racy_addr", "succ1", "succ2"}
    assert d["racy_addr"] == [1, "dee"]
    assert d["initial"]["locks"] == [0, 0]
    assert all(len(cell) == 3 for cell in d["initial"]["heap"])
    assert d["schedule"][0] == ["t1", "skip"]


def test_full_search_fallback_agrees(dodo):
    fields = field_set(dodo)
    cross = next(r for r in _strict_reports(dodo) if r.method2 == "zap")
    from ilrace.witness import _full_search, build_initial_state

    init = build_initial_state(
        cross.access1.path.fields, fields,
        cross.access1.path.root, cross.access2.path.root,
    )
    w = _full_search(cross, dodo, fields, init, EnumBounds())
    assert w.racy_addr[1] == "dee"


def test_interprocedural_witness():
    # the racy access sits inside a callee; the witness still reconstructs
    p = parse_program(
        "method deep(arg1){ y := new(); arg1.g := y; }"
        "method outer(arg1){ deep(arg1.f); }"
        "method reader(arg1){ x := arg1.f.g; }"
    )
    reps = _strict_reports(p)
    pair = next(
        r for r in reps if {r.method1, r.method2} == {"outer", "reader"}
    )
    w = reconstruct(pair, p, field_set(p))
    assert replay_witness(w, field_set(p)).addr == w.racy_addr
    assert any(str(c).startswith("push(deep") for _, c in w.schedule)
