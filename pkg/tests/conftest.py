import numpy as np
import pytest
from hypothesis import strategies as st

from toolselect import ArmParams

ACCEPTANCE_LINES: list[str] = []

param_value = st.floats(min_value=0.1, max_value=0.6, allow_nan=False)
arm_params = st.builds(ArmParams, param_value, param_value, param_value, param_value)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def arm():
    return ArmParams(0.3, 0.5, 0.4, 0.5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
