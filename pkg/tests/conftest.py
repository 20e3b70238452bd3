import numpy as np
import pytest

from waveinv.geometry import BoxDomain, build_grid


@pytest.fixture
def cube():
    """11^3 unit cube with a 2-layer margin."""
    return build_grid(BoxDomain((0, 0, 0), (1, 1, 1)), BoxDomain((0.2, 0.2, 0.2), (0.8, 0.8, 0.8)), 0.1)


@pytest.fixture
def small():
    """9^3 lattice used for gradient and duality checks."""
    return build_grid(BoxDomain((0, 0, 0), (0.8, 0.8, 0.8)), BoxDomain((0.2, 0.2, 0.2), (0.6, 0.6, 0.6)), 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
