import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _acceptance_lines.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def simplex(n, min_value=0.0):
    """Hypothesis strategy for a probability vector of length ``n``."""
    return st.lists(st.floats(min_value, 1.0), min_size=n, max_size=n).filter(
        lambda v: sum(v) > 1e-3).map(lambda v: np.array(v) / sum(v))


def random_pmf(rng, n, floor=0.0):
    p = rng.random(n) + floor
    return p / p.sum()


def random_channel(rng, m, n, floor=0.0):
    c = rng.random((m, n)) + floor
    return c / c.sum(axis=1, keepdims=True)
