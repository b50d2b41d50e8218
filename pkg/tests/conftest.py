import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: list[str] = []


@pytest.fixture
def record_criterion():
    """Log one acceptance line; the lines are replayed in the terminal summary."""
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _CRITERIA.append(f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
