"""Race reporting: pair matching, the stability filter, lock budgets.

Two accesses are a candidate when their paths spell the same field
sequence (roots may differ; the two threads' parameters are assumed to
alias) and at least one of them writes.  A candidate becomes a report
only if

* each path is stable in its own method: no wobbly expression of that
  summary is a proper prefix of it (the path itself being wobbly is fine);
* the lock contexts fit the mode: strict demands lock1 + lock2 <= 1,
  relaxed only that some side is lock-free.

Strict mode is the default; it is the regime under which every report is
backed by a concrete witness.  Relaxed widens the lock condition and
carries no such guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .abstraction import WRITE, AbstractState, AccessRecord
from .analysis import SummaryTable
from .lang import Expr, Path, Program, prefix_lt

STRICT = "strict"
RELAXED = "relaxed"


@dataclass(frozen=True)
class RaceReport:
    method1: str
    method2: str
    access1: AccessRecord
    access2: AccessRecord
    mode: str
    witness: Optional[object] = None  # WitnessTrace, attached by the driver

    @property
    def field_seq(self) -> tuple[str, ...]:
        return self.access1.path.fields

    def key(self) -> tuple:
        a1, a2 = self.access1, self.access2
        return (
            self.method1, self.method2,
            str(a1.path), str(a2.path),
            a1.kind, a2.kind, a1.lock, a2.lock,
        )

    def to_json_dict(self) -> dict:
        d = {
            "method1": self.method1,
            "method2": self.method2,
            "path1": str(self.access1.path),
            "path2": str(self.access2.path),
            "kind1": self.access1.kind,
            "kind2": self.access2.kind,
            "lock1": self.access1.lock,
            "lock2": self.access2.lock,
            "mode": self.mode,
        }
        if self.witness is not None:
            d["witness"] = self.witness.to_json_dict()
        return d

    def __str__(self) -> str:
        w = "  [witnessed]" if self.witness is not None else ""
        return (
            f"race[{self.mode}]: {self.method1} {self.access1}  ||  "
            f"{self.method2} {self.access2}{w}"
        )


def candidates(
    s1: AbstractState, s2: AbstractState
) -> list[tuple[AccessRecord, AccessRecord]]:
    """Ordered access pairs sharing a field sequence, at least one a write.

    For a summary paired with itself an access may pair with its own
    record: the same code can run in both threads.
    """
    out = []
    for a1 in sorted(s1.accesses, key=str):
        for a2 in sorted(s2.accesses, key=str):
            if a1.kind != WRITE and a2.kind != WRITE:
                continue
            if a1.path.fields == a2.path.fields:
                out.append((a1, a2))
    return out


def stable(path: Path, wobbly: frozenset[Expr]) -> bool:
    """No wobbly expression is a proper prefix of the path.

    A wobbly root destabilizes all paths under it; the path itself being
    wobbly does not matter, since accessing a path never moves it.
    """
    return not any(prefix_lt(e, path) for e in wobbly)


def _lock_ok(mode: str, l1: int, l2: int) -> bool:
    if mode == STRICT:
        return l1 + l2 <= 1
    return min(l1, l2) == 0


def _normalized(m1: str, a1: AccessRecord, m2: str, a2: AccessRecord, mode: str) -> RaceReport:
    # The write goes in slot 1; write/write pairs keep the given order.
    if a1.kind != WRITE and a2.kind == WRITE:
        m1, a1, m2, a2 = m2, a2, m1, a1
    return RaceReport(m1, m2, a1, a2, mode)


def report(
    p: Program,
    table: SummaryTable,
    mode: str = STRICT,
    entries: Optional[tuple[str, ...]] = None,
) -> list[RaceReport]:
    """All races between entry-method pairs (self-pairs included).

    Deterministic: pairs are visited in lexicographic order, duplicates
    (same paths, kinds and locks) collapse, and the result is sorted.
    """
    if mode not in (STRICT, RELAXED):
        raise ValueError(f"unknown mode {mode!r}")
    names = sorted(entries if entries is not None else p.entries)
    out: dict[tuple, RaceReport] = {}
    for i, m1 in enumerate(names):
        for m2 in names[i:]:
            s1, s2 = table[m1], table[m2]
            for a1, a2 in candidates(s1, s2):
                if not stable(a1.path, s1.wobbly):
                    continue
                if not stable(a2.path, s2.wobbly):
                    continue
                if not _lock_ok(mode, a1.lock, a2.lock):
                    continue
                rep = _normalized(m1, a1, m2, a2, mode)
                out.setdefault(rep.key(), rep)
    return sorted(out.values(), key=lambda r: r.key())
