"""Command-line driver.

Subcommands:

    analyze         parse, validate, summarize, report (witnesses in strict mode)
    oracle-check    compare each entry summary against the bounded trace oracle
    witness         analyze strictly and print the reconstructed witnesses
    fuzz            generate random programs and run both cross-checks on them
    dump-summaries  one JSON summary object per method
    dump-traces     the bounded trace set of each entry method

Exit codes: 0 no races, 1 races found, 2 invalid input, 3 property violation.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional

from .abstraction import AbstractState
from .analysis import summarize_program
from .fuzz import FuzzConfig, gen_program, shrink
from .lang import Program, SourceError, field_set, parse_program, program_to_source
from .oracle import check_completeness, check_true_positives
from .report import RELAXED, STRICT, RaceReport, report
from .semantics import EnumBounds, enumerate_traces, syntactic, universal_config
from .validate import validate_program
from .witness import WitnessError, reconstruct

EXIT_OK = 0
EXIT_RACES = 1
EXIT_INVALID = 2
EXIT_PROPERTY = 3


def _bounds(args: argparse.Namespace) -> EnumBounds:
    return EnumBounds(loop_unroll=args.loop_unroll, lock_cap=args.lock_cap)


def _entries(args: argparse.Namespace, program: Program) -> tuple[str, ...]:
    if not args.entries:
        return program.entries
    names = tuple(s.strip() for s in args.entries.split(",") if s.strip())
    for n in names:
        if n not in program.methods:
            raise SourceError(0, 0, f"unknown entry method {n!r}")
    return names


def _load_program(path: str, args: argparse.Namespace) -> tuple[Program, tuple[str, ...]]:
    """Parse and validate, or exit 2 with diagnostics."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            program = parse_program(fh.read())
        entries = _entries(args, program)
    except OSError as exc:
        _fail_invalid(args, [f"cannot read {path}: {exc}"])
    except SourceError as exc:
        _fail_invalid(args, [str(exc)])
    violations = validate_program(program)
    if violations:
        _fail_invalid(args, [str(v) for v in violations])
    return program, entries


def _fail_invalid(args: argparse.Namespace, diagnostics: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"error": "invalid-input", "diagnostics": diagnostics}))
    else:
        for d in diagnostics:
            print(f"error: {d}", file=sys.stderr)
    raise SystemExit(EXIT_INVALID)


def _attach_witnesses(
    reports: list[RaceReport],
    program: Program,
    bounds: EnumBounds,
    lock_cap: int,
    required: bool,
) -> tuple[list[RaceReport], list[str]]:
    fields = field_set(program)
    out: list[RaceReport] = []
    failures: list[str] = []
    for rep in reports:
        try:
            w = reconstruct(rep, program, fields, bounds, lock_cap)
            out.append(RaceReport(
                rep.method1, rep.method2, rep.access1, rep.access2, rep.mode, w
            ))
        except WitnessError as exc:
            out.append(rep)
            if required:
                failures.append(f"{rep}: {exc}")
    return out, failures


def cmd_analyze(args: argparse.Namespace) -> int:
    program, entries = _load_program(args.file, args)
    table = summarize_program(program, args.lock_cap)
    reports = report(program, table, args.mode, entries)
    failures: list[str] = []
    if args.mode == STRICT or args.witness:
        reports, failures = _attach_witnesses(
            reports, program, _bounds(args), args.lock_cap,
            required=(args.mode == STRICT),
        )
    if args.json:
        print(json.dumps([r.to_json_dict() for r in reports], indent=2))
    else:
        if not reports:
            print("no races found")
        for r in reports:
            print(r)
    if failures:
        for f in failures:
            print(f"witness failure: {f}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_RACES if reports else EXIT_OK


def cmd_oracle_check(args: argparse.Namespace) -> int:
    program, entries = _load_program(args.file, args)
    mismatches = check_completeness(
        program, entries, unrolls=(1, 2), lock_cap=args.lock_cap
    )
    checked = {name for name in entries}
    for name in sorted(checked):
        bad = [m for m in mismatches if m.method == name]
        print(f"{name}: {'MISMATCH' if bad else 'ok'}")
        for m in bad:
            print(m.describe())
    return EXIT_PROPERTY if mismatches else EXIT_OK


def cmd_witness(args: argparse.Namespace) -> int:
    args.mode = STRICT
    args.witness = True
    return cmd_analyze(args)


def cmd_dump_summaries(args: argparse.Namespace) -> int:
    program, entries = _load_program(args.file, args)
    table = summarize_program(program, args.lock_cap)
    for name in entries:
        print(json.dumps(_summary_json(name, table[name])))
    return EXIT_OK


def _summary_json(name: str, s: AbstractState) -> dict:
    return {
        "method": name,
        "wobbly": sorted(str(e) for e in s.wobbly),
        "lock_delta": s.lock,
        "accesses": sorted(
            (
                {"kind": a.kind, "path": str(a.path), "lock": a.lock}
                for a in s.accesses
            ),
            key=lambda d: (d["path"], d["kind"], d["lock"]),
        ),
    }


def cmd_dump_traces(args: argparse.Namespace) -> int:
    program, entries = _load_program(args.file, args)
    fields = field_set(program)
    init = universal_config(fields)
    for name in entries:
        print(f"== {name}")
        traces = enumerate_traces(
            program.method(name).body, init, program.methods, fields, _bounds(args)
        )
        for t in traces:
            print("; ".join(str(cmd) for cmd in syntactic(t)))
    return EXIT_OK


def cmd_fuzz(args: argparse.Namespace) -> int:
    cfg = FuzzConfig()
    rng = random.Random(args.seed)
    bounds = _bounds(args)
    stats = {"programs": 0, "methods": 0, "reports": 0, "witnesses": 0}
    for i in range(args.n):
        program = gen_program(rng, cfg)
        stats["programs"] += 1
        stats["methods"] += len(program.methods)

        mismatches = check_completeness(program, lock_cap=args.lock_cap)
        if mismatches:
            return _fuzz_failure(
                args, program, i,
                "summary differs from trace abstraction",
                lambda p: bool(check_completeness(p, lock_cap=args.lock_cap)),
                [m.describe() for m in mismatches],
            )

        tp = check_true_positives(program, bounds, args.lock_cap)
        stats["reports"] += len(tp.reports)
        stats["witnesses"] += len(tp.witnesses)
        if tp.failures:
            return _fuzz_failure(
                args, program, i,
                "strict report without a concrete witness",
                lambda p: bool(
                    check_true_positives(p, bounds, args.lock_cap).failures
                ),
                [f"{rep}: {why}" for rep, why in tp.failures],
            )

        table = summarize_program(program, args.lock_cap)
        strict_keys = {r.key() for r in report(program, table, STRICT)}
        relaxed_keys = {r.key() for r in report(program, table, RELAXED)}
        if not strict_keys <= relaxed_keys:
            return _fuzz_failure(
                args, program, i, "a strict report is missing from relaxed mode",
                lambda p: True, [],
            )
    print(
        "fuzz ok: {programs} programs, {methods} methods, "
        "{reports} strict reports, {witnesses} witnesses".format(**stats)
    )
    return EXIT_OK


def _fuzz_failure(
    args: argparse.Namespace,
    program: Program,
    index: int,
    what: str,
    still_fails,
    details: list[str],
) -> int:
    print(f"fuzz failure on program {index} (seed {args.seed}): {what}",
          file=sys.stderr)
    for d in details:
        print(d, file=sys.stderr)
    minimal = shrink(program, still_fails)
    print("minimal failing program:", file=sys.stderr)
    print(program_to_source(minimal), file=sys.stderr)
    return EXIT_PROPERTY


def _add_common(sub: argparse.ArgumentParser, needs_file: bool = True) -> None:
    if needs_file:
        sub.add_argument("file", help="program source file")
    sub.add_argument("--mode", choices=[STRICT, RELAXED], default=STRICT)
    sub.add_argument("--entries", default="",
                     help="comma-separated methods to race-check (default: all)")
    sub.add_argument("--loop-unroll", type=int, default=2, dest="loop_unroll")
    sub.add_argument("--lock-cap", type=int, default=255, dest="lock_cap")
    sub.add_argument("--json", action="store_true")
    sub.add_argument("--witness", action="store_true",
                     help="also attempt witnesses outside strict mode")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--n", type=int, default=200)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ilrace",
        description="compositional race detection with concrete witnesses",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_file in (
        ("analyze", cmd_analyze, True),
        ("oracle-check", cmd_oracle_check, True),
        ("witness", cmd_witness, True),
        ("fuzz", cmd_fuzz, False),
        ("dump-summaries", cmd_dump_summaries, True),
        ("dump-traces", cmd_dump_traces, True),
    ):
        sub = subs.add_parser(name)
        _add_common(sub, needs_file)
        sub.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    if args.lock_cap < 1:
        parser.error("--lock-cap must be at least 1")
    if args.loop_unroll < 0:
        parser.error("--loop-unroll must be nonnegative")
    try:
        return args.fn(args)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
