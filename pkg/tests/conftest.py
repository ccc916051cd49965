from __future__ import annotations

import random
from pathlib import Path

import pytest

from ilrace.fuzz import gen_program
from ilrace.lang import Program, parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

CORPUS_SEED = 42
CORPUS_SIZE = 200


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.il").read_text(encoding="utf-8")


def fixture_program(name: str) -> Program:
    return parse_program(fixture_source(name))


@pytest.fixture(scope="session")
def dodo() -> Program:
    return fixture_program("dodo")


@pytest.fixture(scope="session")
def burble() -> Program:
    return fixture_program("burble")


@pytest.fixture(scope="session")
def wurble() -> Program:
    return fixture_program("wurble")


@pytest.fixture(scope="session")
def corpus() -> list[Program]:
    """The shared fuzz corpus used by the acceptance suite."""
    rng = random.Random(CORPUS_SEED)
    return [gen_program(rng) for _ in range(CORPUS_SIZE)]
