import numpy as np
import pytest

from cascadeforge.dataset import Dataset, Sample


def make_dataset(rows, name="toy"):
    return Dataset(tuple(Sample(i, text, label) for i, (text, label) in enumerate(rows)), name)


@pytest.fixture
def toy():
    return make_dataset([
        ("good great fine", 1),
        ("great good", 1),
        ("bad awful", 0),
        ("bad terrible fine", 0),
        ("awful bad bad", 0),
        ("good fine", 1),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
