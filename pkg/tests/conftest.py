import json
from pathlib import Path

import pytest

from mannmix import _accel
from mannmix.examples import golden_problem, kepler_problem

FIXTURES = Path(__file__).parent / "fixtures"
_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def golden():
    return golden_problem()


@pytest.fixture(scope="session")
def kepler():
    return kepler_problem()


@pytest.fixture(scope="session")
def rng_vectors():
    return json.loads((FIXTURES / "rng_seed42_stream0.json").read_text())


@pytest.fixture
def numpy_backend(monkeypatch):
    """Force the pure-numpy kernels for the duration of a test."""
    monkeypatch.setattr(_accel, "USE_NUMBA", False)
    yield


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
