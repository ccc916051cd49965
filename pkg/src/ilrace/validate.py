"""Static validators for the assumptions the analysis relies on.

Four independent checks, each returning a (possibly empty) list of
violations and never raising:

* balanced locking     -- lock()/unlock() pair up inside every block;
* argument-normal form -- no store of a formal into a heap path;
* definite initialization -- locals are assigned on all paths before use;
* no recursion         -- the call graph is a DAG.

A program that passes all four is eligible for analysis, and the
reporter's guarantees only hold for such programs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lang import (
    AssignVar,
    CallItem,
    CompoundStmt,
    IfItem,
    Load,
    Lock,
    New,
    Pos,
    Program,
    Store,
    Unlock,
    Var,
    WhileItem,
    block_items,
    call_sites,
    expr_root,
)

UNMATCHED_UNLOCK = "unmatched-unlock"
UNBALANCED_BLOCK = "unbalanced-block"
ANF_VIOLATION = "anf"
USE_BEFORE_INIT = "use-before-init"
RECURSION_CYCLE = "recursion"


@dataclass(frozen=True)
class Violation:
    code: str
    method: str
    message: str
    pos: Optional[Pos] = None

    def __str__(self) -> str:
        where = f" at {self.pos[0]}:{self.pos[1]}" if self.pos else ""
        return f"[{self.code}] {self.method}{where}: {self.message}"


# ---------------------------------------------------------------------------
# Balanced locking
# ---------------------------------------------------------------------------


def _check_block_balance(method: str, c: CompoundStmt, out: list[Violation]) -> None:
    # Each block balances on its own; nested blocks and calls contribute 0.
    balance = 0
    for item in block_items(c):
        if isinstance(item, Lock):
            balance += 1
        elif isinstance(item, Unlock):
            if balance == 0:
                out.append(Violation(
                    UNMATCHED_UNLOCK, method,
                    "unlock() without a matching lock() in the same block",
                    item.pos,
                ))
            else:
                balance -= 1
        elif isinstance(item, IfItem):
            _check_block_balance(method, item.then_branch, out)
            _check_block_balance(method, item.else_branch, out)
        elif isinstance(item, WhileItem):
            _check_block_balance(method, item.body, out)
    if balance > 0:
        out.append(Violation(
            UNBALANCED_BLOCK, method,
            f"block ends with {balance} unreleased lock(s)",
        ))


def validate_balanced_locking(p: Program) -> list[Violation]:
    out: list[Violation] = []
    for m in p.methods.values():
        _check_block_balance(m.name, m.body, out)
    return out


# ---------------------------------------------------------------------------
# Argument-normal form
# ---------------------------------------------------------------------------


def validate_anf(p: Program) -> list[Violation]:
    """Reject stores of the shape ``pi := argJ``.

    Summaries substitute actual expressions for formals; a formal used as a
    store source would turn into a path on the right of a store, which the
    grammar cannot express.  Rewrite as ``tmp := argJ; pi := tmp``.
    """
    out: list[Violation] = []

    def walk(method: str, c: CompoundStmt) -> None:
        for item in block_items(c):
            if isinstance(item, IfItem):
                walk(method, item.then_branch)
                walk(method, item.else_branch)
            elif isinstance(item, WhileItem):
                walk(method, item.body)
            elif isinstance(item, Store) and item.src.is_formal:
                out.append(Violation(
                    ANF_VIOLATION, method,
                    f"store of formal {item.src} into {item.dst}; rewrite as "
                    f"'tmp := {item.src}; {item.dst} := tmp'",
                    item.pos,
                ))

    for m in p.methods.values():
        walk(m.name, m.body)
    return out


# ---------------------------------------------------------------------------
# Definite initialization
# ---------------------------------------------------------------------------


def _definite_init_block(
    method: str, c: CompoundStmt, defined: frozenset[str], out: list[Violation]
) -> frozenset[str]:
    """Forward must-assign analysis; returns the defined-set after the block."""

    def check_read(v: Var, pos: Optional[Pos]) -> None:
        if not v.is_formal and v.name not in defined:
            out.append(Violation(
                USE_BEFORE_INIT, method,
                f"{v.name} may be read before it is assigned",
                pos,
            ))

    for item in block_items(c):
        if isinstance(item, AssignVar):
            check_read(item.src, item.pos)
            defined = defined | {item.dst.name}
        elif isinstance(item, Load):
            check_read(item.src.root, item.pos)
            defined = defined | {item.dst.name}
        elif isinstance(item, Store):
            check_read(item.dst.root, item.pos)
            check_read(item.src, item.pos)
        elif isinstance(item, New):
            defined = defined | {item.dst.name}
        elif isinstance(item, CallItem):
            for e in item.actuals:
                check_read(expr_root(e), item.pos)
        elif isinstance(item, IfItem):
            d1 = _definite_init_block(method, item.then_branch, defined, out)
            d2 = _definite_init_block(method, item.else_branch, defined, out)
            defined = d1 & d2
        elif isinstance(item, WhileItem):
            # The body may run zero times: its assignments do not survive.
            _definite_init_block(method, item.body, defined, out)
    return defined


def validate_definite_init(p: Program) -> list[Violation]:
    out: list[Violation] = []
    for m in p.methods.values():
        _definite_init_block(m.name, m.body, frozenset(), out)
    return out


# ---------------------------------------------------------------------------
# No recursion
# ---------------------------------------------------------------------------


def validate_no_recursion(p: Program) -> list[Violation]:
    """The call graph must be a DAG; reports one cycle if not."""
    graph = {
        m.name: sorted({site.callee for site in call_sites(m.body)})
        for m in p.methods.values()
    }
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in graph}
    stack: list[str] = []

    def dfs(name: str) -> Optional[list[str]]:
        color[name] = GREY
        stack.append(name)
        for callee in graph[name]:
            if callee not in color:
                continue  # unknown callee is caught at parse time
            if color[callee] == GREY:
                return stack[stack.index(callee):]
            if color[callee] == WHITE:
                cycle = dfs(callee)
                if cycle is not None:
                    return cycle
        stack.pop()
        color[name] = BLACK
        return None

    for name in graph:
        if color[name] == WHITE:
            cycle = dfs(name)
            if cycle is not None:
                return [Violation(
                    RECURSION_CYCLE, cycle[0],
                    "recursive call cycle: " + " -> ".join(cycle + [cycle[0]]),
                )]
    return []


def validate_program(p: Program) -> list[Violation]:
    """Run all four validators; empty result means the program is analyzable."""
    out: list[Violation] = []
    out.extend(validate_balanced_locking(p))
    out.extend(validate_anf(p))
    out.extend(validate_definite_init(p))
    out.extend(validate_no_recursion(p))
    return out
