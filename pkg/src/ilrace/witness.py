"""Concrete witnesses for reported races.

For a strict-mode report the schedule is found directly instead of by
searching the interleaving lattice: the lock-free side runs first, alone,
up to (but not through) its access; the other thread then runs from the
resulting heap up to its own access.  Both pending accesses must resolve
to the same address in the final shared state, which the race checker
verifies against the runtime race definition.

The shared initial state is a chain: distinct locations l1..ln spell the
common field sequence, every other field and variable points at a
universal node l0, and both threads' path roots alias l1.  On such a
state the racy path is disconnected (nothing outside its footprint
reaches it) and acyclic (its resolution never revisits a location), which
is what keeps it pinned in place while stable code runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .abstraction import (
    DEFAULT_LOCK_CAP,
    BOTTOM,
    AccessRecord,
    exec_step,
    subst_expr,
)
from .lang import CompoundStmt, Load, Path, Program, SimpleStmt, Store, Var
from .report import STRICT, RaceReport
from .semantics import (
    UNDEFINED,
    Addr,
    Config,
    ConcurrentState,
    ConcurrentTrace,
    EnumBounds,
    Frame,
    Heap,
    Loc,
    RaceEvidence,
    Trace,
    TwoThreadConfig,
    check_race,
    enumerate_traces,
    eval_address,
    extend_weave,
    interleave,
    maximal_weaves,
)


class WitnessError(Exception):
    """A report could not be backed by a concrete execution."""


# ---------------------------------------------------------------------------
# Path geometry predicates
# ---------------------------------------------------------------------------


def path_footprint(path: Path, frame: Frame, heap: Heap) -> Optional[dict[Addr, Loc]]:
    """The heap fragment resolving a path: every prefix address and its cell."""
    out: dict[Addr, Loc] = {}
    loc = frame.lookup(path.root.name)
    addr = (loc, path.fields[0])
    for f in path.fields[1:] + (None,):
        if addr not in heap:
            return None
        out[addr] = heap[addr]
        if f is not None:
            addr = (heap[addr], f)
    return out


def is_disconnected(path: Path, frame: Frame, heap: Heap) -> bool:
    """Nothing outside the footprint points into it.

    Both clauses are checked against the frame's default binding too: the
    variable store is total, so the default stands for every unnamed
    variable.
    """
    fp = path_footprint(path, frame, heap)
    if fp is None:
        return False
    fp_locs = {a[0] for a in fp}
    if frame.default in fp_locs:
        return False
    for name, v in frame.bindings:
        if name != path.root.name and v in fp_locs:
            return False
    return all(
        addr in fp for addr, v in heap.items() if v in fp_locs
    )


def is_acyclic(path: Path, frame: Frame, heap: Heap) -> bool:
    """Resolution never revisits a location already on the path."""
    fp = path_footprint(path, frame, heap)
    if fp is None:
        return False
    addrs = list(fp)  # prefix order
    for j, aj in enumerate(addrs):
        for ai in addrs[: j + 1]:
            if heap[aj] == ai[0]:
                return False
    return True


# ---------------------------------------------------------------------------
# Appendix-style chain initial state
# ---------------------------------------------------------------------------


def build_initial_state(
    field_seq: tuple[str, ...],
    fields: frozenset[str],
    root1: Var,
    root2: Var,
) -> TwoThreadConfig:
    """A shared heap where both threads see the same chain for `field_seq`.

    Locations 0..n are distinct; location 0 self-loops on every field and
    is the default target of everything not on the chain.  Thread i's
    `rooti` points at location 1, and following the field sequence walks
    1 -> 2 -> ... -> n, ending at an address whose cell holds 0.
    """
    n = len(field_seq)
    if n == 0:
        raise ValueError("the shared field sequence must be nonempty")
    universe = sorted(set(fields) | set(field_seq))
    heap: Heap = {(0, f): 0 for f in universe}
    for j in range(1, n + 1):
        chain_field = field_seq[j - 1] if j < n else None
        for f in universe:
            heap[(j, f)] = j + 1 if f == chain_field else 0
    s1 = Frame((), default=0).bind(root1.name, 1)
    s2 = Frame((), default=0).bind(root2.name, 1)
    return TwoThreadConfig(((s1,), (s2,)), heap, (0, 0))


# ---------------------------------------------------------------------------
# Locating an access inside the bounded trace set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccessPrefix:
    prefix: Trace  # ends just before the access commits
    pending: SimpleStmt  # the load/store about to execute
    addr: Addr  # the address that access will touch


def find_access_prefix(
    body: CompoundStmt,
    init: Config,
    target: AccessRecord,
    program: Program,
    fields: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
    lock_cap: int = DEFAULT_LOCK_CAP,
) -> Optional[AccessPrefix]:
    """The shortest trace prefix whose successor performs the target access.

    A successor matches when it is a load/store of the right kind whose
    path, pushed through the substitution stack accumulated so far, equals
    the target path under the target lock context.
    """
    best: Optional[tuple[int, int, AccessPrefix]] = None
    traces = enumerate_traces(body, init, program.methods, fields, bounds)
    for t_idx, trace in enumerate(traces):
        state, stack = BOTTOM, ()
        for k in range(1, len(trace)):
            state, stack = exec_step(state, stack, trace[k - 1].cmd, lock_cap)
            cmd = trace[k].cmd
            if isinstance(cmd, Store):
                kind, path = "write", cmd.dst
            elif isinstance(cmd, Load):
                kind, path = "read", cmd.src
            else:
                continue
            if kind != target.kind or state.lock != target.lock:
                continue
            if subst_expr(path, stack) != target.path:
                continue
            before = trace[k - 1]
            addr = eval_address(path, before.stack[0], before.heap)
            if addr is UNDEFINED:
                continue
            if best is None or k < best[0]:
                best = (k, t_idx, AccessPrefix(trace[:k], cmd, addr))
            break  # later positions in this trace are no shorter
    return best[2] if best else None


# ---------------------------------------------------------------------------
# Witness traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessTrace:
    initial: TwoThreadConfig
    schedule: tuple[tuple[int, SimpleStmt], ...]
    racy_addr: Addr
    succ1: SimpleStmt
    succ2: SimpleStmt

    def to_json_dict(self) -> dict:
        def frame_json(fr: Frame) -> dict:
            return {"bindings": dict(fr.bindings), "default": fr.default}

        return {
            "initial": {
                "heap": sorted(
                    [l, f, v] for (l, f), v in self.initial.heap.items()
                ),
                "stacks": [
                    [frame_json(fr) for fr in stack]
                    for stack in self.initial.stacks
                ],
                "locks": list(self.initial.locks),
            },
            "schedule": [[f"t{which}", str(cmd)] for which, cmd in self.schedule],
            "racy_addr": list(self.racy_addr),
            "succ1": str(self.succ1),
            "succ2": str(self.succ2),
        }


def replay_witness(
    w: WitnessTrace,
    fields: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
) -> RaceEvidence:
    """Re-run the schedule and re-check the race; raises if anything drifts."""
    cfg = w.initial
    weave: ConcurrentTrace = []
    for which, cmd in w.schedule:
        steps = extend_weave(cfg, which, cmd, fields, bounds)
        if not steps:
            raise WitnessError(f"schedule step t{which} {cmd} is infeasible")
        st = steps[0]
        weave.append(st)
        cfg = TwoThreadConfig(st.stacks, st.heap, st.locks)
    succ1 = extend_weave(cfg, 1, w.succ1, fields, bounds)
    succ2 = extend_weave(cfg, 2, w.succ2, fields, bounds)
    if not succ1 or not succ2:
        raise WitnessError("a pending access is stuck at the end of the schedule")
    evidence = check_race(weave, succ1[0], succ2[0])
    if evidence is None:
        raise WitnessError("replayed schedule does not race")
    if evidence.addr != w.racy_addr:
        raise WitnessError(
            f"replay races at {evidence.addr}, witness claims {w.racy_addr}"
        )
    return evidence


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def _assert_preserved(
    path: Path, entry0: Frame, heap0: Heap, entry1: Frame, heap1: Heap
) -> None:
    """Runtime form of path preservation along the first thread's prefix."""
    if entry0.lookup(path.root.name) != entry1.lookup(path.root.name):
        raise WitnessError(f"root of {path} moved during the prefix")
    fp0 = path_footprint(path, entry0, heap0)
    fp1 = path_footprint(path, entry1, heap1)
    if fp0 is None or fp1 is None:
        raise WitnessError(f"footprint of {path} became unresolvable")
    if set(fp0) != set(fp1):
        raise WitnessError(f"footprint domain of {path} changed")
    final = list(fp0)[-1]
    for addr in fp0:
        if addr != final and fp0[addr] != fp1[addr]:
            raise WitnessError(f"interior of {path}'s footprint was overwritten")


def reconstruct(
    rep: RaceReport,
    program: Program,
    fields: frozenset[str],
    bounds: EnumBounds = EnumBounds(),
    lock_cap: int = DEFAULT_LOCK_CAP,
    full_search: bool = False,
) -> WitnessTrace:
    """Build and machine-check a concrete racy execution for a report.

    Raises WitnessError when no witness is found within bounds; for
    strict-mode reports on validated programs that is a defect, not an
    expected outcome.
    """
    # Thread 1 is the side whose access happens lock-free.
    if rep.access1.lock == 0:
        (m1, a1), (m2, a2) = (rep.method1, rep.access1), (rep.method2, rep.access2)
    elif rep.access2.lock == 0:
        (m1, a1), (m2, a2) = (rep.method2, rep.access2), (rep.method1, rep.access1)
    else:
        raise WitnessError("neither access is lock-free; no schedule exists")

    init = build_initial_state(a1.path.fields, fields, a1.path.root, a2.path.root)
    s1, s2 = init.stacks[0][0], init.stacks[1][0]
    for path, frame in ((a1.path, s1), (a2.path, s2)):
        if not is_disconnected(path, frame, init.heap):
            raise WitnessError(f"{path} is not disconnected in the initial state")
        if not is_acyclic(path, frame, init.heap):
            raise WitnessError(f"{path} is not acyclic in the initial state")

    res1 = find_access_prefix(
        program.method(m1).body, Config((s1,), init.heap, 0),
        a1, program, fields, bounds, lock_cap,
    )
    if res1 is None:
        if full_search:
            return _full_search(rep, program, fields, init, bounds)
        raise WitnessError(f"no prefix realizes {a1} in {m1}")
    end1 = res1.prefix[-1]
    if end1.locks != 0:
        raise WitnessError("thread 1 still holds the lock at its access")
    _assert_preserved(a1.path, s1, init.heap, end1.stack[-1], end1.heap)

    res2 = find_access_prefix(
        program.method(m2).body, Config((s2,), end1.heap, 0),
        a2, program, fields, bounds, lock_cap,
    )
    if res2 is None:
        if full_search:
            return _full_search(rep, program, fields, init, bounds)
        raise WitnessError(f"no prefix realizes {a2} in {m2} after thread 1")

    schedule = tuple(
        [(1, st.cmd) for st in res1.prefix] + [(2, st.cmd) for st in res2.prefix]
    )
    w = WitnessTrace(init, schedule, res2.addr, res1.pending, res2.pending)
    evidence = replay_witness(w, fields, bounds)  # raises when infeasible
    return WitnessTrace(init, schedule, evidence.addr, res1.pending, res2.pending)


def _full_search(
    rep: RaceReport,
    program: Program,
    fields: frozenset[str],
    init: TwoThreadConfig,
    bounds: EnumBounds,
) -> WitnessTrace:
    """Debug fallback: scan the whole bounded interleaving lattice."""
    body1 = program.method(rep.method1).body
    body2 = program.method(rep.method2).body
    t1s = enumerate_traces(
        body1, Config(init.stacks[0], init.heap, 0), program.methods, fields, bounds
    )
    t2s = enumerate_traces(
        body2, Config(init.stacks[1], init.heap, 0), program.methods, fields, bounds
    )
    for t1 in t1s:
        for t2 in t2s:
            cmds1 = [st.cmd for st in t1]
            cmds2 = [st.cmd for st in t2]
            for weave in maximal_weaves(interleave(t1, t2, init, fields, bounds)):
                for cut in range(1, len(weave) + 1):
                    prefix = weave[:cut]
                    done1 = sum(1 for st in prefix if st.which == 1)
                    done2 = sum(1 for st in prefix if st.which == 2)
                    if done1 >= len(cmds1) or done2 >= len(cmds2):
                        continue
                    cfg = TwoThreadConfig(
                        prefix[-1].stacks, prefix[-1].heap, prefix[-1].locks
                    )
                    n1 = extend_weave(cfg, 1, cmds1[done1], fields, bounds)
                    n2 = extend_weave(cfg, 2, cmds2[done2], fields, bounds)
                    if not n1 or not n2:
                        continue
                    evidence = check_race(prefix, n1[0], n2[0])
                    if evidence is not None:
                        schedule = tuple((st.which, st.cmd) for st in prefix)
                        return WitnessTrace(
                            init, schedule, evidence.addr,
                            cmds1[done1], cmds2[done2],
                        )
    raise WitnessError("exhaustive interleaving search found no race")
