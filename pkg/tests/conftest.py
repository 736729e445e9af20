import numpy as np
import pytest
from hypothesis import settings

from fgrt.fuzzy_core import FeaturePartition, LinguisticTerm, Trapezoid

# fixed example sequence so repeated runs of the suite agree
settings.register_profile("repeatable", derandomize=True, deadline=None)
settings.load_profile("repeatable")


def aligned_partition(name="x"):
    """Low and High meet at 0.5; Medium only covers the gap the data never visits."""
    return FeaturePartition(name, (
        LinguisticTerm("Low", Trapezoid(0.0, 0.0, 0.4, 0.5)),
        LinguisticTerm("Medium", Trapezoid(0.4, 0.5, 0.5, 0.6)),
        LinguisticTerm("High", Trapezoid(0.5, 0.6, 1.0, 1.0)),
    ), 0.0, 1.0)


def aligned_data(n, seed):
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(n) < 0.5, rng.uniform(0.0, 0.4, n), rng.uniform(0.6, 1.0, n))
    return x[:, None], (x > 0.5).astype(int)


@pytest.fixture
def aligned():
    X, y = aligned_data(200, 0)
    return X, y, [aligned_partition()]


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
