"""From traces to summaries: the fold over syntactic traces.

A method summary lives in a three-part domain:

* W -- the wobbly expressions: everything read or written (or rebound by
  allocation) during some run, plus call actuals that overlap each other;
* L -- the lock context, a saturating counter;
* A -- the recorded path accesses, each tagged read/write and with the
  lock context it happened under.

`exec_fold` replays a syntactic trace left to right.  A stack of
substitutions mirrors the call stack: entering a call pushes the mapping
from formals to the actual expressions written at the call site, and every
contribution is pushed through that stack before it lands in W or A.
Anything that ends up rooted at a local variable is dropped; only
formal-rooted facts survive into a summary.

`alpha` lifts the fold to sets of traces by joining pointwise; it is
additive, so summaries of trace-set unions are joins of summaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .lang import (
    AssignVar,
    Expr,
    Load,
    Lock,
    New,
    Path,
    Pop,
    Pos,
    Push,
    SimpleStmt,
    Skip,
    Store,
    Unlock,
    expr_fields,
    expr_root,
    extend_expr,
    prefix_le,
)
from .semantics import Trace, syntactic

DEFAULT_LOCK_CAP = 255

READ = "read"
WRITE = "write"


class PopOnEmpty(Exception):
    """More pops than pushes: the trace being folded is corrupted."""


@dataclass(frozen=True)
class AccessRecord:
    """One recorded heap access; equality ignores provenance metadata."""

    kind: str  # READ | WRITE
    path: Path
    lock: int
    method: Optional[str] = field(default=None, compare=False)
    pos: Optional[Pos] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.kind} {self.path} @{self.lock}"


@dataclass(frozen=True)
class AbstractState:
    wobbly: frozenset[Expr] = frozenset()
    lock: int = 0
    accesses: frozenset[AccessRecord] = frozenset()

    def join(self, other: "AbstractState") -> "AbstractState":
        return AbstractState(
            self.wobbly | other.wobbly,
            max(self.lock, other.lock),
            self.accesses | other.accesses,
        )

    def leq(self, other: "AbstractState") -> bool:
        return (
            self.wobbly <= other.wobbly
            and self.lock <= other.lock
            and self.accesses <= other.accesses
        )


BOTTOM = AbstractState()


def join_all(states: Iterable[AbstractState]) -> AbstractState:
    out = BOTTOM
    for s in states:
        out = out.join(s)
    return out


# ---------------------------------------------------------------------------
# Substitution stacks
# ---------------------------------------------------------------------------

SubstFrame = dict[str, Expr]  # formal name -> actual expression
SubstStack = tuple[SubstFrame, ...]  # index 0 is the innermost call


def subst_expr(e: Expr, stack: SubstStack) -> Optional[Expr]:
    """Push an expression through the substitution stack, innermost first.

    Returns None (the empty set) when the expression bottoms out at a local:
    either its root is absent from the innermost frame, or, once all frames
    are applied, the root is not a formal.
    """
    if not stack:
        return e if expr_root(e).is_formal else None
    top = stack[0]
    root = expr_root(e)
    if root.name not in top:
        return None
    return subst_expr(extend_expr(top[root.name], expr_fields(e)), stack[1:])


def _subst_record(rec: AccessRecord, stack: SubstStack) -> Optional[AccessRecord]:
    """Substitution touches only the path component; vanishing path drops it."""
    new_path = subst_expr(rec.path, stack)
    if new_path is None:
        return None
    assert isinstance(new_path, Path), "substituting a path yields a path"
    return AccessRecord(rec.kind, new_path, rec.lock, rec.method, rec.pos)


def overlapping_actuals(actuals: Sequence[Expr]) -> frozenset[Expr]:
    """Actuals that prefix-overlap some other actual (symmetric closure).

    Passing m(x.f, x.f.g) may alias the two formals inside the callee, so
    both expressions become wobbly at the call site.
    """
    out = set()
    for i, e1 in enumerate(actuals):
        for j, e2 in enumerate(actuals):
            if i != j and (prefix_le(e1, e2) or prefix_le(e2, e1)):
                out.add(e1)
                break
    return frozenset(out)


# ---------------------------------------------------------------------------
# The fold
# ---------------------------------------------------------------------------


def lock_add(l1: int, l2: int, cap: int = DEFAULT_LOCK_CAP) -> int:
    return min(l1 + l2, cap)


def exec_step(
    state: AbstractState,
    stack: SubstStack,
    cmd: SimpleStmt,
    lock_cap: int = DEFAULT_LOCK_CAP,
    method: Optional[str] = None,
) -> tuple[AbstractState, SubstStack]:
    """Fold a single command into (abstract state, substitution stack)."""
    w, l, a = state.wobbly, state.lock, state.accesses

    def subst_all(exprs: Iterable[Expr]) -> frozenset[Expr]:
        return frozenset(
            r for e in exprs if (r := subst_expr(e, stack)) is not None
        )

    if isinstance(cmd, Skip):
        return state, stack
    if isinstance(cmd, AssignVar):
        return AbstractState(w | subst_all((cmd.dst, cmd.src)), l, a), stack
    if isinstance(cmd, Load):
        rec = _subst_record(AccessRecord(READ, cmd.src, l, method, cmd.pos), stack)
        new_a = a | {rec} if rec is not None else a
        return AbstractState(w | subst_all((cmd.dst, cmd.src)), l, new_a), stack
    if isinstance(cmd, Store):
        rec = _subst_record(AccessRecord(WRITE, cmd.dst, l, method, cmd.pos), stack)
        new_a = a | {rec} if rec is not None else a
        return AbstractState(w | subst_all((cmd.dst, cmd.src)), l, new_a), stack
    if isinstance(cmd, New):
        return AbstractState(w | subst_all((cmd.dst,)), l, a), stack
    if isinstance(cmd, Lock):
        return AbstractState(w, lock_add(l, 1, lock_cap), a), stack
    if isinstance(cmd, Unlock):
        return AbstractState(w, max(l - 1, 0), a), stack
    if isinstance(cmd, Push):
        new_w = w | subst_all(overlapping_actuals(cmd.actuals))
        frame: SubstFrame = {
            f"arg{i}": e for i, e in enumerate(cmd.actuals, start=1)
        }
        return AbstractState(new_w, l, a), (frame,) + stack
    if isinstance(cmd, Pop):
        if not stack:
            raise PopOnEmpty("pop with no matching push in the folded trace")
        return state, stack[1:]
    raise ValueError(f"cannot fold command {cmd!r}")


def exec_fold(
    cmds: Iterable[SimpleStmt],
    lock_cap: int = DEFAULT_LOCK_CAP,
    method: Optional[str] = None,
) -> tuple[AbstractState, SubstStack]:
    """Fold a whole syntactic trace from bottom with an empty stack."""
    state, stack = BOTTOM, ()
    for cmd in cmds:
        state, stack = exec_step(state, stack, cmd, lock_cap, method)
    return state, stack


def alpha(
    traces: Iterable[Trace],
    lock_cap: int = DEFAULT_LOCK_CAP,
    method: Optional[str] = None,
) -> AbstractState:
    """Abstract a set of traces: join the folds of their command projections."""
    return join_all(
        exec_fold(syntactic(t), lock_cap, method)[0] for t in traces
    )
