import pytest

from mfcontract.model import MeanFieldModel

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture
def baseline():
    """Baseline of the sensitivity table."""
    return MeanFieldModel(alpha=0.25, beta1=0.1, beta2=0.5, gamma=0.2)


@pytest.fixture
def baseline_g0():
    return MeanFieldModel(alpha=0.25, beta1=0.1, beta2=0.5, gamma=0.0)


@pytest.fixture
def unit():
    """kappa = beta2 = gamma = 0, n = 2, c = 1."""
    return MeanFieldModel()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
