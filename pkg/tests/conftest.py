import numpy as np
import pytest

from p1rt0 import generate_structured_unit_square


@pytest.fixture(scope="session")
def grids():
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = generate_structured_unit_square(n)
        return cache[n]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def reference_triangle():
    from p1rt0.mesh import Triangulation
    return Triangulation.from_cells([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
