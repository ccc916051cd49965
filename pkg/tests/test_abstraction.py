from __future__ import annotations

import random

import pytest

from ilrace.abstraction import (
    BOTTOM,
    AbstractState,
    AccessRecord,
    PopOnEmpty,
    alpha,
    exec_fold,
    exec_step,
    join_all,
    overlapping_actuals,
    subst_expr,
)
from ilrace.fuzz import gen_program
from ilrace.lang import (
    Load,
    Lock,
    Path,
    Pop,
    Push,
    Skip,
    Store,
    Unlock,
    Var,
    field_set,
    parse_expr,
    parse_program,
)
from ilrace.semantics import enumerate_traces, syntactic, universal_config


def _fold(cmds):
    return exec_fold(cmds)


def _traces(p, name="m"):
    fields = field_set(p)
    return enumerate_traces(
        p.method(name).body, universal_config(fields), p.methods, fields
    )


# -- substitution -------------------------------------------------------------


def test_subst_local_with_empty_stack_vanishes():
    assert subst_expr(parse_expr("x.f"), ()) is None
    assert subst_expr(parse_expr("arg1.f"), ()) == parse_expr("arg1.f")


def test_subst_single_frame():
    stack = ({"arg1": parse_expr("arg2.g")},)
    assert subst_expr(parse_expr("arg1.f"), stack) == parse_expr("arg2.g.f")


def test_subst_frames_compose_innermost_first():
    stack = (
        {"arg1": parse_expr("arg1.g")},
        {"arg1": parse_expr("arg2")},
    )
    # manual composition: arg1.f -> arg1.g.f -> arg2.g.f
    assert subst_expr(parse_expr("arg1.f"), stack) == parse_expr("arg2.g.f")


def test_subst_unknown_formal_vanishes():
    stack = ({"arg1": parse_expr("arg2")},)
    assert subst_expr(parse_expr("arg3.f"), stack) is None
    assert subst_expr(parse_expr("y"), stack) is None


# -- the fold -------------------------------------------------------------------


def test_fold_load_drops_local_destination():
    state, stack = _fold([Skip(), Load(Var("x"), Path(Var("arg1"), ("f",)))])
    assert state.wobbly == {parse_expr("arg1.f")}
    assert state.lock == 0
    assert state.accesses == {AccessRecord("read", Path(Var("arg1"), ("f",)), 0)}
    assert stack == ()


def test_fold_lock_context_at_access():
    state, _ = _fold([
        Skip(), Lock(),
        Store(Path(Var("arg1"), ("f",)), Var("x")),
        Unlock(),
    ])
    assert state.wobbly == {parse_expr("arg1.f")}
    assert state.lock == 0  # balanced overall
    assert state.accesses == {AccessRecord("write", Path(Var("arg1"), ("f",)), 1)}


def test_fold_push_wobbles_overlapping_actuals():
    state, stack = _fold([
        Skip(),
        Push("m", (parse_expr("arg1.f"), parse_expr("arg1.f.g"))),
        Pop(),
    ])
    assert parse_expr("arg1.f") in state.wobbly
    assert parse_expr("arg1.f.g") in state.wobbly  # symmetric overlap
    assert state.accesses == frozenset()
    assert stack == ()


def test_fold_substitutes_through_the_call():
    state, _ = _fold([
        Skip(),
        Push("n", (parse_expr("arg1.g"),)),
        Load(Var("x"), Path(Var("arg1"), ("f",))),
        Pop(),
    ])
    assert state.accesses == {AccessRecord("read", parse_expr("arg1.g.f"), 0)}
    assert state.wobbly == {parse_expr("arg1.g.f")}


def test_fold_local_actual_drops_callee_accesses():
    state, _ = _fold([
        Skip(),
        Push("n", (parse_expr("y"),)),
        Load(Var("x"), Path(Var("arg1"), ("f",))),
        Pop(),
    ])
    assert state.accesses == frozenset()
    assert state.wobbly == frozenset()


def test_pop_on_empty_stack_raises():
    with pytest.raises(PopOnEmpty):
        _fold([Skip(), Pop()])


def test_overlapping_actuals_cases():
    e = parse_expr
    assert overlapping_actuals((e("x.f"), e("x.f.g"))) == {e("x.f"), e("x.f.g")}
    assert overlapping_actuals((e("x"), e("x.f"))) == {e("x"), e("x.f")}
    assert overlapping_actuals((e("x.f"), e("y.f"))) == frozenset()
    assert overlapping_actuals((e("x"), e("x"))) == {e("x")}  # equal actuals alias
    assert overlapping_actuals((e("x"),)) == frozenset()  # needs a distinct position


def test_fold_unlock_floors_at_zero():
    state, _ = _fold([Skip(), Unlock(), Unlock(), Lock()])
    assert state.lock == 1


def test_fold_respects_lock_cap():
    state, _ = exec_fold([Skip(), Lock(), Lock(), Lock()], lock_cap=2)
    assert state.lock == 2


# -- alpha -----------------------------------------------------------------------


def test_alpha_of_nothing_is_bottom():
    assert alpha([]) == BOTTOM


def test_alpha_of_singleton_is_the_fold():
    p = parse_program("method m(arg1){ lock(); x := arg1.f; unlock(); }")
    [t] = _traces(p)
    assert alpha([t]) == exec_fold(syntactic(t))[0]


def test_alpha_is_additive():
    rng = random.Random(5)
    for _ in range(40):
        p = gen_program(rng)
        name = rng.choice(list(p.methods))
        traces = _traces(p, name)
        cut = rng.randint(0, len(traces))
        t1, t2 = traces[:cut], traces[cut:]
        assert alpha(traces) == alpha(t1).join(alpha(t2))


def test_fold_grows_monotonically_along_prefixes():
    rng = random.Random(6)
    for _ in range(20):
        p = gen_program(rng)
        name = rng.choice(list(p.methods))
        for t in _traces(p, name)[:5]:
            state, stack = BOTTOM, ()
            prev = state
            for cmd in syntactic(t):
                state, stack = exec_step(prev, stack, cmd)
                assert prev.wobbly <= state.wobbly
                assert prev.accesses <= state.accesses
                prev = state


def test_every_record_is_formal_rooted():
    from ilrace.lang import expr_root

    rng = random.Random(7)
    for _ in range(30):
        p = gen_program(rng)
        for name in p.methods:
            a = alpha(_traces(p, name))
            for e in a.wobbly:
                assert expr_root(e).is_formal
            for rec in a.accesses:
                assert rec.path.root.is_formal


def test_join_all_matches_pairwise_join():
    s1 = AbstractState(frozenset({parse_expr("arg1")}), 1, frozenset())
    s2 = AbstractState(frozenset({parse_expr("arg2")}), 2, frozenset())
    assert join_all([s1, s2]) == s1.join(s2)
