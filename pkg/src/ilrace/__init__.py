"""Compositional static race detection with machine-checked witnesses.

The pipeline: parse a program in the small concurrent language, validate
the structural assumptions (balanced locking, argument-normal form,
definite initialization, no recursion), summarize every method with the
compositional analyzer, match access pairs into race reports, and back
each strict-mode report with a concrete interleaved execution found by
the bounded trace semantics.
"""

from .abstraction import (
    BOTTOM,
    AbstractState,
    AccessRecord,
    alpha,
    exec_fold,
    subst_expr,
)
from .analysis import SummaryTable, analyze_compound, apply_summary, join, summarize_program
from .lang import (
    ParseError,
    Program,
    ReservedConstructError,
    SourceError,
    field_set,
    parse_program,
    program_to_source,
)
from .oracle import check_completeness, check_true_positives
from .report import RELAXED, STRICT, RaceReport, candidates, report, stable
from .semantics import (
    BoundExceeded,
    Config,
    EnumBounds,
    RaceEvidence,
    check_race,
    enumerate_traces,
    eval_address,
    interleave,
    step_simple,
    universal_config,
)
from .validate import (
    Violation,
    validate_anf,
    validate_balanced_locking,
    validate_definite_init,
    validate_no_recursion,
    validate_program,
)
from .witness import (
    WitnessError,
    WitnessTrace,
    build_initial_state,
    find_access_prefix,
    reconstruct,
    replay_witness,
)

__version__ = "0.1.0"
