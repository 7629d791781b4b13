from __future__ import annotations

from pathlib import Path

import pytest

from qhoist.semantics import FiniteModel
from qhoist.syntax import VarTable, parse
from qhoist.testkit import VARS

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
NAMES = {str(v): v.index for v in VARS}


def P(text: str, table: VarTable | None = None):
    """Parse with the generator's variable numbering (x=1, y=2, z=3, ...)."""
    return parse(text, None, table if table is not None else VarTable(NAMES))


@pytest.fixture
def table():
    return VarTable(NAMES)


@pytest.fixture
def m2():
    """n=2 with p={0}, q={0,1}, r={(0,1)}."""
    return FiniteModel.build(2, {"p": [(0,)], "q": [(0,), (1,)], "r": [(0, 1)]}, {"p": 1, "q": 1, "r": 2})


@pytest.fixture
def m1():
    return FiniteModel.build(1, {"p": [(0,)], "q": [], "r": []}, {"p": 1, "q": 1, "r": 2})


ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    """Log one acceptance line (shown in the terminal summary), then assert."""
    ACCEPTANCE[criterion] = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    print(ACCEPTANCE[criterion])
    assert ok, ACCEPTANCE[criterion]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
