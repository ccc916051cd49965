"""The compositional analyzer: transfer functions and method summaries.

Each method body is analyzed once, bottom-up over the (acyclic) call
graph, from the empty abstract state.  Call sites never re-analyze the
callee: they instantiate its summary by substituting actual expressions
for formals, adding the caller's lock context onto every recorded access,
and folding in the actuals that prefix-overlap one another.

Branches join (set union on W and A, max on L); a loop joins its entry
state with one application of the body, which saturates: a second
application adds nothing for balanced-locking bodies.
"""

from __future__ import annotations

from typing import Optional

from .abstraction import (
    BOTTOM,
    DEFAULT_LOCK_CAP,
    READ,
    WRITE,
    AbstractState,
    AccessRecord,
    lock_add,
    overlapping_actuals,
)
from .lang import (
    AssignVar,
    CompoundStmt,
    Expr,
    Load,
    Lock,
    Method,
    New,
    Path,
    Pop,
    Pos,
    Program,
    Push,
    Seq,
    SeqCall,
    SeqIf,
    SeqWhile,
    Simple,
    SimpleStmt,
    Skip,
    Store,
    Unlock,
    call_sites,
    expr_fields,
    expr_root,
    extend_expr,
)

SummaryTable = dict[str, AbstractState]


class AnalysisError(Exception):
    pass


class ArityMismatch(AnalysisError):
    pass


class MissingSummary(AnalysisError):
    pass


def join(d1: AbstractState, d2: AbstractState) -> AbstractState:
    """Componentwise least upper bound: union, max, union."""
    return d1.join(d2)


def incr_lock(l: int, cap: int = DEFAULT_LOCK_CAP) -> int:
    return lock_add(l, 1, cap)


def decr_lock(l: int) -> int:
    return max(l - 1, 0)


def _fml(exprs: set[Expr]) -> frozenset[Expr]:
    """Keep only expressions rooted at a formal."""
    return frozenset(e for e in exprs if expr_root(e).is_formal)


def transfer_simple(
    c: SimpleStmt,
    d: AbstractState,
    cap: int = DEFAULT_LOCK_CAP,
    method: Optional[str] = None,
) -> AbstractState:
    """Abstract effect of one simple command (Push/Pop are not analyzable)."""
    if isinstance(c, (Push, Pop)):
        raise AnalysisError(f"runtime statement {c} has no transfer function")
    w, l, a = d.wobbly, d.lock, d.accesses
    if isinstance(c, Skip):
        return d
    if isinstance(c, AssignVar):
        return AbstractState(w | _fml({c.dst, c.src}), l, a)
    if isinstance(c, Load):
        rec = AccessRecord(READ, c.src, l, method, c.pos)
        new_a = a | {rec} if c.src.root.is_formal else a
        return AbstractState(w | _fml({c.dst, c.src}), l, new_a)
    if isinstance(c, Store):
        rec = AccessRecord(WRITE, c.dst, l, method, c.pos)
        new_a = a | {rec} if c.dst.root.is_formal else a
        return AbstractState(w | _fml({c.dst, c.src}), l, new_a)
    if isinstance(c, New):
        return AbstractState(w | _fml({c.dst}), l, a)
    if isinstance(c, Lock):
        return AbstractState(w, incr_lock(l, cap), a)
    if isinstance(c, Unlock):
        return AbstractState(w, decr_lock(l), a)
    raise AnalysisError(f"unknown simple statement {c!r}")


def _subst_by_actuals(e: Expr, actuals: tuple[Expr, ...]) -> Optional[Expr]:
    """Replace a formal root by its actual; None if the root is not a formal.

    Summaries only contain formal-rooted expressions, so a None here means
    a malformed summary rather than a local access.
    """
    idx = expr_root(e).formal_index
    if idx is None or idx > len(actuals):
        return None
    return extend_expr(actuals[idx - 1], expr_fields(e))


def apply_summary(
    callee: Method,
    actuals: tuple[Expr, ...],
    d: AbstractState,
    summaries: SummaryTable,
    cap: int = DEFAULT_LOCK_CAP,
    pos: Optional[Pos] = None,
) -> AbstractState:
    """Instantiate a callee summary at a call site.

    W gains the overlapping actuals and the callee's wobbly set with
    actuals substituted for formals; L gains the callee's (saturating)
    lock delta; every callee access is re-rooted through the actuals and
    shifted by the caller's current lock context.  Contributions whose
    substituted root is a local vanish.
    """
    if callee.arity != len(actuals):
        raise ArityMismatch(
            f"{callee.name} takes {callee.arity} argument(s), got {len(actuals)}"
        )
    if callee.name not in summaries:
        raise MissingSummary(callee.name)
    summary = summaries[callee.name]

    new_w = set(d.wobbly)
    new_w.update(
        e for e in overlapping_actuals(actuals) if expr_root(e).is_formal
    )
    for e in summary.wobbly:
        se = _subst_by_actuals(e, actuals)
        if se is not None and expr_root(se).is_formal:
            new_w.add(se)

    new_a = set(d.accesses)
    for rec in summary.accesses:
        spath = _subst_by_actuals(rec.path, actuals)
        if spath is not None and expr_root(spath).is_formal:
            assert isinstance(spath, Path)
            new_a.add(AccessRecord(
                rec.kind, spath, lock_add(d.lock, rec.lock, cap),
                rec.method, rec.pos,
            ))

    return AbstractState(
        frozenset(new_w), lock_add(d.lock, summary.lock, cap), frozenset(new_a)
    )


def analyze_compound(
    c: CompoundStmt,
    d: AbstractState,
    summaries: SummaryTable,
    program: Program,
    cap: int = DEFAULT_LOCK_CAP,
    method: Optional[str] = None,
) -> AbstractState:
    """Structural transfer over a compound statement."""
    if isinstance(c, Simple):
        return transfer_simple(c.stmt, d, cap, method)
    if isinstance(c, Seq):
        d1 = analyze_compound(c.head, d, summaries, program, cap, method)
        return transfer_simple(c.tail, d1, cap, method)
    if isinstance(c, SeqIf):
        d1 = analyze_compound(c.head, d, summaries, program, cap, method)
        return join(
            analyze_compound(c.then_branch, d1, summaries, program, cap, method),
            analyze_compound(c.else_branch, d1, summaries, program, cap, method),
        )
    if isinstance(c, SeqWhile):
        d1 = analyze_compound(c.head, d, summaries, program, cap, method)
        return join(
            d1, analyze_compound(c.body, d1, summaries, program, cap, method)
        )
    if isinstance(c, SeqCall):
        d1 = analyze_compound(c.head, d, summaries, program, cap, method)
        return apply_summary(
            program.method(c.callee), c.actuals, d1, summaries, cap, c.pos
        )
    raise TypeError(f"not a compound statement: {c!r}")


def _topo_order(p: Program) -> list[str]:
    """Methods ordered callees-first; assumes the call graph is acyclic."""
    order: list[str] = []
    seen: set[str] = set()

    def visit(name: str) -> None:
        if name in seen:
            return
        seen.add(name)
        for site in call_sites(p.method(name).body):
            visit(site.callee)
        order.append(name)

    for name in p.methods:
        visit(name)
    return order


def summarize_program(p: Program, cap: int = DEFAULT_LOCK_CAP) -> SummaryTable:
    """Summaries for every method, each computed once from bottom."""
    table: SummaryTable = {}
    for name in _topo_order(p):
        table[name] = analyze_compound(
            p.method(name).body, BOTTOM, table, p, cap, method=name
        )
    return table
