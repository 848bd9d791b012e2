import numpy as np
import pytest

import fvewave as fw


def pytest_configure(config):
    config._criterion_lines = []


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion(pytestconfig):
    """Record one pass/fail line per acceptance criterion, then assert."""

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        pytestconfig._criterion_lines.append(line)
        print(line)
        assert passed, line

    return record


def _zeros(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


@pytest.fixture(scope="session")
def wave_problem():
    """Memory-free wave with zero forcing; conserves the discrete energy."""
    return fw.ProblemSpec(
        name="wave",
        coeff=fw.CoefficientField.identity(),
        kernel=None,
        forcing=lambda x, y, t: np.zeros_like(np.asarray(x, dtype=float)),
        u0=lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        u1=_zeros,
    )
