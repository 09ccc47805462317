import numpy as np
import pytest

from latentdlm.lag_design import assemble_design

ACCEPTANCE_LINES = {}


def record(criterion: int, passed: bool, detail: str):
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def small_design():
    rng = np.random.default_rng(123)
    n = 60
    statics = {"a": rng.standard_normal(n), "b": rng.standard_normal(n)}
    return assemble_design(statics, include_intercept=True)
