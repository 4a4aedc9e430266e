"""Shared fixtures: a deterministic RNG, tiny trained fixtures, and the
acceptance summary hook that prints one line per criterion.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_image(rng, shape=(8, 8, 1)):
    return rng.random(shape)


# Collected by tests/test_acceptance.py; printed at the end of the run.
ACCEPTANCE_RESULTS = []


def record_acceptance(number, description, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, description, passed, detail))


def summary_lines():
    lines = []
    for number, description, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        lines.append(f"acceptance {number}: {status} - {description}{suffix}")
    return lines


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in summary_lines():
        terminalreporter.write_line(line)
