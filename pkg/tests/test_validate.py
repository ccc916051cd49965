from __future__ import annotations

from ilrace.lang import Var, parse_program
from ilrace.semantics import Config, EnumBounds, Frame, enumerate_traces
from ilrace.validate import (
    ANF_VIOLATION,
    RECURSION_CYCLE,
    UNBALANCED_BLOCK,
    UNMATCHED_UNLOCK,
    USE_BEFORE_INIT,
    validate_anf,
    validate_balanced_locking,
    validate_definite_init,
    validate_no_recursion,
    validate_program,
)


def _prog(body: str, extra: str = "") -> "Program":
    return parse_program(f"method m(arg1) {{ {body} }} {extra}")


# -- balanced locking --------------------------------------------------------


def test_balanced_pair_ok():
    assert validate_balanced_locking(_prog("lock(); x := arg1.f; unlock();")) == []


def test_unmatched_unlock():
    vs = validate_balanced_locking(_prog("unlock();"))
    assert [v.code for v in vs] == [UNMATCHED_UNLOCK]


def test_unbalanced_branch_block():
    vs = validate_balanced_locking(_prog("if * { lock(); } else { skip; }"))
    assert [v.code for v in vs] == [UNBALANCED_BLOCK]


def test_blocks_balance_independently():
    # The inner block may not release a lock taken outside it.
    vs = validate_balanced_locking(
        _prog("lock(); if * { unlock(); lock(); } else { skip; } unlock();")
    )
    assert UNMATCHED_UNLOCK in [v.code for v in vs]


def test_reentrant_nesting_ok():
    assert validate_balanced_locking(
        _prog("lock(); lock(); x := arg1.f; unlock(); unlock();")
    ) == []


# -- argument-normal form ----------------------------------------------------


def test_anf_store_of_formal():
    p = parse_program("method m(arg1, arg2){ arg1.f := arg2; }")
    vs = validate_anf(p)
    assert [v.code for v in vs] == [ANF_VIOLATION]
    assert "tmp := arg2" in vs[0].message  # suggested rewrite


def test_anf_rewritten_form_ok():
    p = parse_program("method m(arg1, arg2){ x := arg2; arg1.f := x; }")
    assert validate_anf(p) == []


def test_anf_no_stores_ok():
    assert validate_anf(_prog("x := arg1.f; y := x;")) == []


# -- definite initialization -------------------------------------------------


def test_init_straight_line_ok():
    assert validate_definite_init(_prog("x := new(); y := x;")) == []


def test_init_unassigned_read():
    vs = validate_definite_init(_prog("y := x;"))
    assert [v.code for v in vs] == [USE_BEFORE_INIT]
    assert "x" in vs[0].message


def test_init_loop_body_does_not_count():
    vs = validate_definite_init(_prog("while * { x := new(); } y := x;"))
    assert [v.code for v in vs] == [USE_BEFORE_INIT]


def test_init_loop_zero_iteration_is_real():
    # Concrete confirmation of the zero-iteration hazard: running the same
    # body from a nil-defaulted frame, some trace reaches y := x with x
    # still nil, i.e. the variable was never assigned on that path.
    p = _prog("while * { x := new(); } y := x;")
    init = Config((Frame((), default=None),), {(0, "f"): 0}, 0)
    traces = enumerate_traces(
        p.method("m").body, init, p.methods, frozenset({"f"}),
        EnumBounds(loop_unroll=2),
    )
    finals = [t[-1].stack[0].lookup("y") for t in traces]
    assert None in finals  # the zero-iteration trace leaks nil into y
    assert any(v is not None for v in finals)


def test_init_branch_join_is_intersection():
    vs = validate_definite_init(
        _prog("if * { x := new(); } else { skip; } y := x;")
    )
    assert [v.code for v in vs] == [USE_BEFORE_INIT]
    assert validate_definite_init(
        _prog("if * { x := new(); } else { x := arg1.f; } y := x;")
    ) == []


def test_init_formals_always_defined():
    assert validate_definite_init(_prog("y := arg1;")) == []


def test_init_call_actuals_are_reads():
    p = parse_program(
        "method n(arg1){ skip; } method m(arg1){ n(x.f); }"
    )
    assert [v.code for v in validate_definite_init(p)] == [USE_BEFORE_INIT]


# -- recursion ----------------------------------------------------------------


def test_no_recursion_ok():
    p = parse_program("method n(arg1){ skip; } method m(arg1){ n(arg1); }")
    assert validate_no_recursion(p) == []


def test_self_recursion():
    p = parse_program("method m(arg1){ m(arg1); }")
    vs = validate_no_recursion(p)
    assert [v.code for v in vs] == [RECURSION_CYCLE]
    assert "m -> m" in vs[0].message


def test_mutual_recursion():
    p = parse_program(
        "method m(arg1){ n(arg1); } method n(arg1){ m(arg1); }"
    )
    vs = validate_no_recursion(p)
    assert [v.code for v in vs] == [RECURSION_CYCLE]
    assert "m" in vs[0].message and "n" in vs[0].message


# -- the bundle ----------------------------------------------------------------


def test_validators_are_deterministic():
    p = _prog("unlock(); y := x;")
    assert validate_program(p) == validate_program(p)


def test_fixtures_validate_clean():
    from .conftest import fixture_program

    for name in ("dodo", "burble", "wurble"):
        assert validate_program(fixture_program(name)) == []
