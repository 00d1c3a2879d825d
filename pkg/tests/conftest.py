import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chattering import run  # noqa: E402
from chattering.instance_builder import build_instance  # noqa: E402


@pytest.fixture(scope="session")
def seq6():
    return run(0.5, K=6, precision_bits=128)


@pytest.fixture(scope="session")
def seq9():
    return run(0.5, K=9, precision_bits=256)


@pytest.fixture(scope="session")
def inst6(seq6):
    return build_instance(seq6, 6, 1.0, 64)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
