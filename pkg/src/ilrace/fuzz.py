"""Seeded random generation of valid programs, plus a greedy shrinker.

Programs come out valid by construction: locks are emitted as balanced
blocks, stores never take a formal on the right, locals are only read
after an assignment on every path, and calls go strictly to
later-generated methods, so the call graph is a DAG of bounded depth.

Branchy constructs are rationed program-wide (each conditional doubles
and each loop triples the bounded trace set), which keeps the concrete
oracle cheap on generated programs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .lang import (
    AssignVar,
    BlockItem,
    CallItem,
    CompoundStmt,
    IfItem,
    Load,
    Lock,
    Method,
    New,
    Path,
    Program,
    Skip,
    Store,
    Unlock,
    Var,
    WhileItem,
    block_items,
    block_of_items,
    make_expr,
)
from .validate import validate_program

_LOCAL_POOL = ("x", "y", "z", "w")


@dataclass
class FuzzConfig:
    max_methods: int = 4
    max_stmts: int = 12
    max_call_depth: int = 3
    max_arity: int = 3
    fields: tuple[str, ...] = ("f", "g", "h")
    max_branch_points: int = 3  # program-wide if/while ration
    max_path_fields: int = 2
    max_lock_depth: int = 2


@dataclass
class _GenState:
    rng: random.Random
    cfg: FuzzConfig
    branch_budget: int
    callees: list[Method] = field(default_factory=list)  # generated so far


def _pick_path(g: _GenState, roots: list[str]) -> Path:
    rng = g.rng
    root = Var(rng.choice(roots))
    n = rng.randint(1, g.cfg.max_path_fields)
    fields = tuple(rng.choice(g.cfg.fields) for _ in range(n))
    return Path(root, fields)


def _gen_block(
    g: _GenState,
    formals: list[str],
    defined: set[str],
    budget: int,
    lock_depth: int,
) -> tuple[list[BlockItem], set[str]]:
    rng = g.rng
    items: list[BlockItem] = []
    defined = set(defined)

    def readable() -> list[str]:
        return formals + sorted(defined)

    while budget > 0 and rng.random() < 0.85:
        choice = rng.random()
        if choice < 0.14:
            dst = Var(rng.choice(_LOCAL_POOL + tuple(formals)))
            items.append(New(dst=dst))
            defined.add(dst.name)
            budget -= 1
        elif choice < 0.26:
            dst = Var(rng.choice(_LOCAL_POOL))
            items.append(AssignVar(dst=dst, src=Var(rng.choice(readable()))))
            defined.add(dst.name)
            budget -= 1
        elif choice < 0.50:
            dst = Var(rng.choice(_LOCAL_POOL))
            items.append(Load(dst=dst, src=_pick_path(g, readable())))
            defined.add(dst.name)
            budget -= 1
        elif choice < 0.70:
            locals_only = sorted(defined - set(formals))
            if not locals_only:
                continue  # ANF: a store's source must be a local
            items.append(Store(
                dst=_pick_path(g, readable()), src=Var(rng.choice(locals_only))
            ))
            budget -= 1
        elif choice < 0.80 and lock_depth < g.cfg.max_lock_depth and budget >= 3:
            inner, defined = _gen_block(
                g, formals, defined, min(budget - 2, 4), lock_depth + 1
            )
            items.extend([Lock()] + inner + [Unlock()])
            budget -= 2 + len(inner)
        elif choice < 0.88 and g.branch_budget > 0 and budget >= 2:
            g.branch_budget -= 1
            half = max(1, (budget - 1) // 2)
            then_items, d1 = _gen_block(g, formals, defined, half, lock_depth)
            else_items, d2 = _gen_block(g, formals, defined, half, lock_depth)
            items.append(IfItem(
                block_of_items(then_items), block_of_items(else_items)
            ))
            defined = d1 & d2
            budget -= 1 + len(then_items) + len(else_items)
        elif choice < 0.93 and g.branch_budget > 0 and budget >= 2:
            g.branch_budget -= 1
            body_items, _ = _gen_block(
                g, formals, defined, max(1, (budget - 1) // 2), lock_depth
            )
            items.append(WhileItem(block_of_items(body_items)))
            # zero-iteration path: the body's assignments do not survive
            budget -= 1 + len(body_items)
        elif choice < 0.98 and g.callees:
            callee = rng.choice(g.callees)
            actuals = []
            for _ in range(callee.arity):
                roots = readable()
                if rng.random() < 0.5:
                    actuals.append(make_expr(Var(rng.choice(roots)), ()))
                else:
                    actuals.append(_pick_path(g, roots))
            items.append(CallItem(callee.name, tuple(actuals)))
            budget -= 1
        else:
            items.append(Skip())
            budget -= 1
    return items, defined


def _method_height(m: Method, heights: dict[str, int]) -> int:
    calls = [heights[i.callee] for i in _all_call_items(m.body)]
    return 1 + max(calls, default=0)


def _all_call_items(c: CompoundStmt) -> list[CallItem]:
    out = []
    for item in block_items(c):
        if isinstance(item, IfItem):
            out += _all_call_items(item.then_branch)
            out += _all_call_items(item.else_branch)
        elif isinstance(item, WhileItem):
            out += _all_call_items(item.body)
        elif isinstance(item, CallItem):
            out.append(item)
    return out


def gen_program(rng: random.Random, cfg: FuzzConfig = FuzzConfig()) -> Program:
    """One random valid program; determined entirely by the rng state."""
    n_methods = rng.randint(1, cfg.max_methods)
    g = _GenState(rng, cfg, branch_budget=cfg.max_branch_points)
    methods: list[Method] = []
    heights: dict[str, int] = {}
    # Generate bottom-up so calls always target already-built methods.
    for i in reversed(range(n_methods)):
        name = f"m{i}"
        arity = rng.randint(1, cfg.max_arity)
        formals = [f"arg{j}" for j in range(1, arity + 1)]
        g.callees = [
            m for m in methods if heights[m.name] < cfg.max_call_depth
        ]
        budget = rng.randint(2, cfg.max_stmts)
        items, _ = _gen_block(g, formals, set(), budget, 0)
        m = Method(name=name, arity=arity, body=block_of_items(items))
        heights[name] = _method_height(m, heights)
        methods.append(m)
    methods.reverse()
    program = Program(
        methods={m.name: m for m in methods},
        entries=tuple(m.name for m in methods),
    )
    assert validate_program(program) == [], "generator produced an invalid program"
    return program


# ---------------------------------------------------------------------------
# Shrinking
# ---------------------------------------------------------------------------


def _with_block(method: Method, new_body: CompoundStmt) -> Method:
    return Method(method.name, method.arity, new_body)


def _block_edits(c: CompoundStmt) -> list[CompoundStmt]:
    """Single-step reductions of a block: drop an item or inline a branch."""
    items = block_items(c)
    edits: list[CompoundStmt] = []
    for i, item in enumerate(items):
        edits.append(block_of_items(items[:i] + items[i + 1:]))
        if isinstance(item, IfItem):
            for branch in (item.then_branch, item.else_branch):
                edits.append(block_of_items(
                    items[:i] + block_items(branch) + items[i + 1:]
                ))
        elif isinstance(item, WhileItem):
            edits.append(block_of_items(
                items[:i] + block_items(item.body) + items[i + 1:]
            ))
    return edits


def _nested_edits(c: CompoundStmt) -> list[CompoundStmt]:
    """Reductions applied inside nested blocks."""
    items = block_items(c)
    edits: list[CompoundStmt] = []
    for i, item in enumerate(items):
        if isinstance(item, IfItem):
            for e in _block_edits(item.then_branch) + _nested_edits(item.then_branch):
                edits.append(block_of_items(
                    items[:i] + [IfItem(e, item.else_branch)] + items[i + 1:]
                ))
            for e in _block_edits(item.else_branch) + _nested_edits(item.else_branch):
                edits.append(block_of_items(
                    items[:i] + [IfItem(item.then_branch, e)] + items[i + 1:]
                ))
        elif isinstance(item, WhileItem):
            for e in _block_edits(item.body) + _nested_edits(item.body):
                edits.append(block_of_items(
                    items[:i] + [WhileItem(e)] + items[i + 1:]
                ))
    return edits


def _candidates(p: Program) -> list[Program]:
    out: list[Program] = []
    called = {
        site.callee
        for m in p.methods.values()
        for site in _all_call_items(m.body)
    }
    for name in p.methods:
        if name not in called and len(p.methods) > 1:
            methods = {k: v for k, v in p.methods.items() if k != name}
            out.append(Program(methods, tuple(methods)))
    for name, m in p.methods.items():
        for body in _block_edits(m.body) + _nested_edits(m.body):
            methods = dict(p.methods)
            methods[name] = _with_block(m, body)
            out.append(Program(methods, p.entries))
    return out


def shrink(p: Program, still_fails) -> Program:
    """Greedy minimization: keep any single reduction that still fails."""
    current = p
    progress = True
    while progress:
        progress = False
        for cand in _candidates(current):
            if validate_program(cand):
                continue
            try:
                if still_fails(cand):
                    current = cand
                    progress = True
                    break
            except Exception:
                continue
    return current
