import os

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collects one ``PASS``/``FAIL`` line per acceptance criterion."""

    def add(name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def records_dir():
    return os.path.join(os.path.dirname(__file__), os.pardir, "acceptance", "records")
