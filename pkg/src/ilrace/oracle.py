"""Cross-checks between the analyzer and the concrete semantics.

Two checks back the tool's guarantees at desk scale:

* completeness -- per method, the summary computed compositionally from
  bottom must equal, component for component, the abstraction of every
  bounded trace from a canonical initial state.  Exact set equality, no
  tolerance; checked at loop bounds 1 and 2 (contributions saturate after
  one unrolling, so the two bounds must agree).
* true positives -- every strict-mode report must reconstruct into a
  machine-checked concurrent witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .abstraction import DEFAULT_LOCK_CAP, AbstractState, alpha
from .analysis import SummaryTable, summarize_program
from .lang import Program
from .report import STRICT, RaceReport, report
from .semantics import Config, EnumBounds, enumerate_traces, universal_config
from .lang import field_set as program_field_set
from .witness import WitnessError, WitnessTrace, reconstruct


@dataclass(frozen=True)
class Mismatch:
    method: str
    loop_unroll: int
    abstract: AbstractState
    concrete: AbstractState

    def describe(self) -> str:
        lines = [f"{self.method} (loop_unroll={self.loop_unroll}):"]
        aw, cw = self.abstract.wobbly, self.concrete.wobbly
        aa, ca = self.abstract.accesses, self.concrete.accesses
        if aw != cw:
            lines.append(f"  W analyzer-only : {sorted(map(str, aw - cw))}")
            lines.append(f"  W oracle-only   : {sorted(map(str, cw - aw))}")
        if self.abstract.lock != self.concrete.lock:
            lines.append(
                f"  L analyzer={self.abstract.lock} oracle={self.concrete.lock}"
            )
        if aa != ca:
            lines.append(f"  A analyzer-only : {sorted(map(str, aa - ca))}")
            lines.append(f"  A oracle-only   : {sorted(map(str, ca - aa))}")
        return "\n".join(lines)


def method_abstraction(
    program: Program,
    name: str,
    bounds: EnumBounds,
    lock_cap: int = DEFAULT_LOCK_CAP,
) -> AbstractState:
    """alpha of the bounded trace set of one method body, canonical start."""
    fields = program_field_set(program)
    init = universal_config(fields)
    traces = enumerate_traces(
        program.method(name).body, init, program.methods, fields, bounds
    )
    return alpha(traces, lock_cap)


def check_completeness(
    program: Program,
    entries: tuple[str, ...] | None = None,
    unrolls: tuple[int, ...] = (1, 2),
    lock_cap: int = DEFAULT_LOCK_CAP,
    table: SummaryTable | None = None,
) -> list[Mismatch]:
    """Summary == trace abstraction for each entry method at each bound."""
    if table is None:
        table = summarize_program(program, lock_cap)
    names = entries if entries is not None else program.entries
    mismatches = []
    for name in names:
        for k in unrolls:
            concrete = method_abstraction(
                program, name, EnumBounds(loop_unroll=k, lock_cap=lock_cap), lock_cap
            )
            if table[name] != concrete:
                mismatches.append(Mismatch(name, k, table[name], concrete))
    return mismatches


@dataclass
class TPResult:
    reports: list[RaceReport] = field(default_factory=list)
    witnesses: list[WitnessTrace] = field(default_factory=list)
    failures: list[tuple[RaceReport, str]] = field(default_factory=list)


def check_true_positives(
    program: Program,
    bounds: EnumBounds = EnumBounds(),
    lock_cap: int = DEFAULT_LOCK_CAP,
    entries: tuple[str, ...] | None = None,
    table: SummaryTable | None = None,
) -> TPResult:
    """Reconstruct a witness for every strict report; failures are collected."""
    if table is None:
        table = summarize_program(program, lock_cap)
    fields = program_field_set(program)
    result = TPResult(reports=report(program, table, STRICT, entries))
    for rep in result.reports:
        try:
            result.witnesses.append(
                reconstruct(rep, program, fields, bounds, lock_cap)
            )
        except WitnessError as exc:
            result.failures.append((rep, str(exc)))
    return result
