"""Concrete trace-collecting semantics and the runtime notion of a race.

Executions are nondeterministic only in control (`if *` / `while *`) and,
optionally, in allocation.  A single-thread state pairs the simple command
just executed with the stack/heap/lock configuration it produced; a trace
is a list of such states.  The enumerator explores both branches of every
conditional and unrolls loops up to a bound, so the set of traces it
returns is the bounded fragment of the full semantics.

Conventions that matter downstream:

* A trace always begins with a distinguished `skip` state carrying the
  initial configuration; no other skip produces a state.
* Loads and stores through an unresolvable address contribute nothing
  (the configuration is stuck); so does unlock() at lock count zero.
* new() binds a fresh location whose every field points back to itself.
  Canonical allocation picks the least unused location id, which makes
  replay deterministic.
* Two threads interleave under a single reentrant lock: a thread may step
  only if the other holds no lock, or the step keeps its own lock count
  at zero throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

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
    Var,
)

Loc = int  # locations are naturals; None plays the role of nil
Addr = tuple[Loc, str]
Heap = dict[Addr, Loc]


class _Undefined:
    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Undefined()


class BoundExceeded(Exception):
    """A trace grew past EnumBounds.max_trace_len."""


@dataclass(frozen=True)
class EnumBounds:
    loop_unroll: int = 2
    max_trace_len: int = 10_000
    canonical_alloc: bool = True
    alloc_ways: int = 2  # fresh-location choices when allocation is nondeterministic
    lock_cap: int = 255  # lock() saturates at this count, mirroring the analysis


# ---------------------------------------------------------------------------
# Stacks, heaps, states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """A total variable store: explicit bindings over a default location.

    Bindings equal to the default are never stored, so equal total maps
    compare equal.  The default is nil (None) for callee frames.
    """

    bindings: tuple[tuple[str, Optional[Loc]], ...] = ()
    default: Optional[Loc] = None

    def lookup(self, name: str) -> Optional[Loc]:
        for k, v in self.bindings:
            if k == name:
                return v
        return self.default

    def bind(self, name: str, value: Optional[Loc]) -> "Frame":
        items = tuple((k, v) for k, v in self.bindings if k != name)
        if value != self.default:
            items = items + ((name, value),)
        return Frame(tuple(sorted(items)), self.default)


def frame_of(bindings: dict[str, Optional[Loc]], default: Optional[Loc] = None) -> Frame:
    f = Frame((), default)
    for k, v in bindings.items():
        f = f.bind(k, v)
    return f


Stack = tuple[Frame, ...]  # call-stack; index 0 is the current frame


@dataclass(frozen=True)
class Config:
    stack: Stack
    heap: Heap
    locks: int

    def __post_init__(self) -> None:
        if not self.stack:
            raise ValueError("a configuration needs at least one frame")


@dataclass(frozen=True)
class ConcreteState:
    """One trace element: the command just executed and what it produced."""

    cmd: SimpleStmt
    stack: Stack
    heap: Heap
    locks: int

    def config(self) -> Config:
        return Config(self.stack, self.heap, self.locks)


Trace = list[ConcreteState]


def heap_locs(h: Heap) -> set[Loc]:
    return {loc for loc, _ in h}


def fresh_locs(h: Heap, count: int) -> list[Loc]:
    """The `count` least location ids absent from the heap domain."""
    used = heap_locs(h)
    out: list[Loc] = []
    for i in itertools.count():
        if i not in used:
            out.append(i)
            if len(out) == count:
                return out
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Addresses and values
# ---------------------------------------------------------------------------


def eval_address(path: Path, frame: Frame, heap: Heap) -> Union[Addr, _Undefined]:
    """Resolve the address a load/store of `path` would touch.

    ``x.f`` resolves to (s(x), f); each further field dereferences the heap.
    Resolution is undefined as soon as an intermediate address is absent
    from the heap (which includes every nil-rooted address).
    """
    loc = frame.lookup(path.root.name)
    addr = (loc, path.fields[0])
    for f in path.fields[1:]:
        if addr not in heap:
            return UNDEFINED
        addr = (heap[addr], f)
    return addr


def eval_value(e: Expr, frame: Frame, heap: Heap) -> Union[Optional[Loc], _Undefined]:
    """The value of an expression; a variable's value is always defined."""
    if isinstance(e, Var):
        return frame.lookup(e.name)
    addr = eval_address(e, frame, heap)
    if addr is UNDEFINED or addr not in heap:
        return UNDEFINED
    return heap[addr]


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------


def _alloc_choices(h: Heap, bounds: EnumBounds) -> list[Loc]:
    if bounds.canonical_alloc:
        return fresh_locs(h, 1)
    return fresh_locs(h, max(1, bounds.alloc_ways))


def _allocate(h: Heap, loc: Loc, fields: Iterable[str]) -> Heap:
    h2 = dict(h)
    for f in fields:
        h2[(loc, f)] = loc
    return h2


def step_simple(
    c: SimpleStmt,
    cfg: Config,
    field_set: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
) -> list[Trace]:
    """One-step results of a simple command (not Push): a set of microtraces.

    Each element is [] (for skip, which takes no state) or a single-state
    trace; the empty list of results means the configuration is stuck.
    """
    frame, heap, locks = cfg.stack[0], cfg.heap, cfg.locks
    if isinstance(c, Skip):
        return [[]]
    if isinstance(c, AssignVar):
        s2 = frame.bind(c.dst.name, frame.lookup(c.src.name))
        return [[ConcreteState(c, (s2,) + cfg.stack[1:], heap, locks)]]
    if isinstance(c, Load):
        addr = eval_address(c.src, frame, heap)
        if addr is UNDEFINED or addr not in heap:
            return []
        s2 = frame.bind(c.dst.name, heap[addr])
        return [[ConcreteState(c, (s2,) + cfg.stack[1:], heap, locks)]]
    if isinstance(c, Store):
        addr = eval_address(c.dst, frame, heap)
        if addr is UNDEFINED or addr not in heap:
            return []
        h2 = dict(heap)
        h2[addr] = frame.lookup(c.src.name)
        return [[ConcreteState(c, cfg.stack, h2, locks)]]
    if isinstance(c, New):
        out: list[Trace] = []
        for loc in _alloc_choices(heap, bounds):
            s2 = frame.bind(c.dst.name, loc)
            h2 = _allocate(heap, loc, field_set)
            out.append([ConcreteState(c, (s2,) + cfg.stack[1:], h2, locks)])
        return out
    if isinstance(c, Lock):
        return [[ConcreteState(c, cfg.stack, heap, min(locks + 1, bounds.lock_cap))]]
    if isinstance(c, Unlock):
        if locks <= 0:
            return []
        return [[ConcreteState(c, cfg.stack, heap, locks - 1)]]
    if isinstance(c, Pop):
        return [[ConcreteState(c, cfg.stack[1:], heap, locks)]]
    raise ValueError(f"step_simple cannot execute {c!r}")


def _step_push(
    c: Push, cfg: Config
) -> Optional[Config]:
    """Evaluate actuals and push the callee frame; None when an actual is stuck."""
    frame = cfg.stack[0]
    callee_frame = Frame((), None)
    for i, e in enumerate(c.actuals, start=1):
        v = eval_value(e, frame, cfg.heap)
        if v is UNDEFINED:
            return None
        callee_frame = callee_frame.bind(f"arg{i}", v)
    return Config((callee_frame,) + cfg.stack, cfg.heap, cfg.locks)


def step_command(
    c: SimpleStmt,
    cfg: Config,
    field_set: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
) -> list[ConcreteState]:
    """Re-execute any runtime command (Push included) from a configuration.

    Unlike step_simple, skip produces an explicit state here: this is the
    stepper used to weave and replay whole traces, where every recorded
    state counts as one step.
    """
    if isinstance(c, Skip):
        return [ConcreteState(c, cfg.stack, cfg.heap, cfg.locks)]
    if isinstance(c, Push):
        after = _step_push(c, cfg)
        if after is None:
            return []
        return [ConcreteState(c, after.stack, after.heap, after.locks)]
    return [t[0] for t in step_simple(c, cfg, field_set, bounds) if t]


# ---------------------------------------------------------------------------
# Trace enumeration
# ---------------------------------------------------------------------------


@dataclass
class EnumStats:
    """Diagnostics: how many explorations died in a stuck configuration."""

    stuck_prefixes: int = 0


def _last_config(trace: Trace, start: Config) -> Config:
    return trace[-1].config() if trace else start


class _Enumerator:
    def __init__(
        self,
        methods: dict[str, Method],
        field_set: frozenset[str],
        bounds: EnumBounds,
        stats: Optional[EnumStats],
    ):
        self.methods = methods
        self.field_set = field_set
        self.bounds = bounds
        self.stats = stats
        self.base_len = 0

    def _note_stuck(self) -> None:
        if self.stats is not None:
            self.stats.stuck_prefixes += 1

    def _guard(self, trace: Trace) -> Trace:
        if self.base_len + len(trace) > self.bounds.max_trace_len:
            raise BoundExceeded(
                f"trace exceeds max_trace_len={self.bounds.max_trace_len}"
            )
        return trace

    def compound(self, c: CompoundStmt, cfg: Config) -> Iterator[Trace]:
        if isinstance(c, Simple):
            yield from self.simple(c.stmt, cfg)
        elif isinstance(c, Seq):
            for t in self.compound(c.head, cfg):
                mid = _last_config(t, cfg)
                for t2 in self.simple(c.tail, mid):
                    yield self._guard(t + t2)
        elif isinstance(c, SeqIf):
            for t in self.compound(c.head, cfg):
                mid = _last_config(t, cfg)
                for branch in (c.then_branch, c.else_branch):
                    for t2 in self.compound(branch, mid):
                        yield self._guard(t + t2)
        elif isinstance(c, SeqWhile):
            for t in self.compound(c.head, cfg):
                yield from self.unroll(c.body, t, cfg, self.bounds.loop_unroll)
        elif isinstance(c, SeqCall):
            for t in self.compound(c.head, cfg):
                mid = _last_config(t, cfg)
                yield from self.call(c.callee, c.actuals, t, mid)
        else:
            raise TypeError(f"not a compound statement: {c!r}")

    def simple(self, s: SimpleStmt, cfg: Config) -> Iterator[Trace]:
        results = step_simple(s, cfg, self.field_set, self.bounds)
        if not results:
            self._note_stuck()
        for t in results:
            yield self._guard(t)

    def unroll(self, body: CompoundStmt, t: Trace, cfg: Config, k: int) -> Iterator[Trace]:
        yield t  # exit the loop now
        if k > 0:
            mid = _last_config(t, cfg)
            for t2 in self.compound(body, mid):
                yield from self.unroll(body, self._guard(t + t2), cfg, k - 1)

    def call(
        self, callee: str, actuals: tuple[Expr, ...], t: Trace, cfg: Config
    ) -> Iterator[Trace]:
        push = Push(callee, actuals)
        after = _step_push(push, cfg)
        if after is None:
            self._note_stuck()
            return
        push_state = ConcreteState(push, after.stack, after.heap, after.locks)
        body = self.methods[callee].body
        for t_body in self.compound(body, after):
            end = _last_config(t_body, after)
            pop_state = ConcreteState(Pop(), end.stack[1:], end.heap, end.locks)
            yield self._guard(t + [push_state] + t_body + [pop_state])


def syntactic(trace: Trace) -> tuple[SimpleStmt, ...]:
    """The command projection of a trace (its syntactic trace)."""
    return tuple(st.cmd for st in trace)


def enumerate_traces(
    c: CompoundStmt,
    init: Config,
    methods: dict[str, Method],
    field_set: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
    stats: Optional[EnumStats] = None,
) -> list[Trace]:
    """All bounded traces of a compound from an initial configuration.

    Every trace starts with a skip state carrying `init`.  Output order is
    deterministic: depth-first over choice points (then-branch before else,
    fewer loop iterations first).  Under canonical allocation, traces with
    equal command projections are identical and get deduplicated.
    """
    enum = _Enumerator(methods, field_set, bounds, stats)
    first = ConcreteState(Skip(), init.stack, init.heap, init.locks)
    enum.base_len = 1
    out: list[Trace] = []
    seen: set[tuple[SimpleStmt, ...]] = set()
    for t in enum.compound(c, init):
        full = [first] + t
        if bounds.canonical_alloc:
            key = syntactic(full)
            if key in seen:
                continue
            seen.add(key)
        out.append(full)
    return out


# ---------------------------------------------------------------------------
# Trace sanity predicates
# ---------------------------------------------------------------------------


def is_well_behaved(stacks: Iterable[Frame], heap: Heap) -> bool:
    """No dangling pointers: all bindings and cell values are allocated."""
    locs = heap_locs(heap)
    for frame in stacks:
        if frame.default is not None and frame.default not in locs:
            return False
        for _, v in frame.bindings:
            if v is not None and v not in locs:
                return False
    return all(v in locs for v in heap.values())


def state_well_behaved(st: ConcreteState) -> bool:
    return is_well_behaved(st.stack, st.heap)


def is_well_formed(
    trace: Trace, field_set: frozenset[str], bounds: EnumBounds = EnumBounds()
) -> bool:
    """Replay check: each state is a legal step from its predecessor."""
    for prev, cur in zip(trace, trace[1:]):
        successors = step_command(cur.cmd, prev.config(), field_set, bounds)
        if not any(
            s.stack == cur.stack and s.heap == cur.heap and s.locks == cur.locks
            for s in successors
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# Two-thread interleavings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoThreadConfig:
    stacks: tuple[Stack, Stack]
    heap: Heap
    locks: tuple[int, int]


@dataclass(frozen=True)
class ConcurrentState:
    """A weave element: which thread stepped, with the configs it produced."""

    which: int  # 1 or 2
    cmd: SimpleStmt
    stacks: tuple[Stack, Stack]
    heap: Heap
    locks: tuple[int, int]


ConcurrentTrace = list[ConcurrentState]


def _thread_step(
    cmd: SimpleStmt,
    which: int,
    cfg: TwoThreadConfig,
    field_set: frozenset[str],
    bounds: EnumBounds,
) -> list[TwoThreadConfig]:
    """Step one thread against the shared heap, enforcing lock exclusion.

    The stepping thread must see the other thread lock-free, or keep its
    own lock count at zero before and after the step.
    """
    i = which - 1
    own, other = cfg.locks[i], cfg.locks[1 - i]
    results = step_command(
        cmd, Config(cfg.stacks[i], cfg.heap, own), field_set, bounds
    )
    out = []
    for st in results:
        if not (other == 0 or (own == 0 and st.locks == 0)):
            continue
        stacks = (st.stack, cfg.stacks[1]) if which == 1 else (cfg.stacks[0], st.stack)
        locks = (st.locks, other) if which == 1 else (other, st.locks)
        out.append(TwoThreadConfig(stacks, st.heap, locks))
    return out


def extend_weave(
    prefix_cfg: TwoThreadConfig,
    which: int,
    cmd: SimpleStmt,
    field_set: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
) -> list[ConcurrentState]:
    """All one-step extensions of a weave by the given thread command."""
    return [
        ConcurrentState(which, cmd, after.stacks, after.heap, after.locks)
        for after in _thread_step(cmd, which, prefix_cfg, field_set, bounds)
    ]


def interleave(
    tau1: Trace,
    tau2: Trace,
    init: TwoThreadConfig,
    field_set: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
) -> list[ConcurrentTrace]:
    """All prefix-closed weaves of two traces' commands from a shared state.

    Each step re-executes the next recorded command of one thread against
    the current shared heap, so values and allocations reflect the weave
    rather than the original single-thread runs.  The result contains every
    prefix, the empty weave included; callers interested in maximal weaves
    filter with `maximal_weaves`.
    """
    cmds1 = [st.cmd for st in tau1]
    cmds2 = [st.cmd for st in tau2]
    out: list[ConcurrentTrace] = [[]]

    def go(i1: int, i2: int, cfg: TwoThreadConfig, acc: ConcurrentTrace) -> None:
        if i1 < len(cmds1):
            for nxt in extend_weave(cfg, 1, cmds1[i1], field_set, bounds):
                t = acc + [nxt]
                out.append(t)
                go(i1 + 1, i2, TwoThreadConfig(nxt.stacks, nxt.heap, nxt.locks), t)
        if i2 < len(cmds2):
            for nxt in extend_weave(cfg, 2, cmds2[i2], field_set, bounds):
                t = acc + [nxt]
                out.append(t)
                go(i1, i2 + 1, TwoThreadConfig(nxt.stacks, nxt.heap, nxt.locks), t)

    go(0, 0, init, [])
    return out


def maximal_weaves(weaves: list[ConcurrentTrace]) -> list[ConcurrentTrace]:
    """Weaves that are not a proper prefix of another weave in the set."""
    return [
        w for w in weaves
        if not any(len(w2) > len(w) and w2[: len(w)] == w for w2 in weaves)
    ]


# ---------------------------------------------------------------------------
# Race checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RaceEvidence:
    addr: Addr
    kind1: str  # "read" | "write"
    kind2: str
    path1: Path
    path2: Path


def _access_of(cmd: SimpleStmt) -> Optional[tuple[str, Path]]:
    if isinstance(cmd, Store):
        return ("write", cmd.dst)
    if isinstance(cmd, Load):
        return ("read", cmd.src)
    return None


def check_race(
    prefix: ConcurrentTrace,
    succ1: ConcurrentState,
    succ2: ConcurrentState,
) -> Optional[RaceEvidence]:
    """Decide whether two pending successor accesses collide.

    `succ1`/`succ2` must be valid one-step extensions of `prefix` on
    threads 1 and 2.  They race when at least one is a write and both
    paths resolve to the same address in the final shared state of the
    prefix (resolution uses each thread's current frame there).
    """
    if not prefix:
        raise ValueError("check_race needs a non-empty prefix")
    a1, a2 = _access_of(succ1.cmd), _access_of(succ2.cmd)
    if a1 is None or a2 is None:
        return None
    (kind1, path1), (kind2, path2) = a1, a2
    if kind1 == "read" and kind2 == "read":
        return None
    last = prefix[-1]
    addr1 = eval_address(path1, last.stacks[0][0], last.heap)
    addr2 = eval_address(path2, last.stacks[1][0], last.heap)
    if addr1 is UNDEFINED or addr2 is UNDEFINED or addr1 != addr2:
        return None
    return RaceEvidence(addr1, kind1, kind2, path1, path2)


# ---------------------------------------------------------------------------
# Canonical initial states
# ---------------------------------------------------------------------------


def universal_config(fields: frozenset[str]) -> Config:
    """Every variable points at one location whose fields all self-loop.

    From here no load or store can get stuck, so a validated program
    realizes all of its syntactic traces.
    """
    heap: Heap = {(0, f): 0 for f in sorted(fields)}
    return Config((Frame((), default=0),), heap, 0)
