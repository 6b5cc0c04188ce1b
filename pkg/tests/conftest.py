import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import pytest


@pytest.fixture(scope="session")
def graveleau_m2n2():
    from pme_lab.analytic import graveleau_profile
    return graveleau_profile(2.0, 2)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one 'Ck PASS|FAIL ...' line; echoed now and in the summary."""
    def emit(line):
        print(line)
        _ACCEPTANCE_LINES.append(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
