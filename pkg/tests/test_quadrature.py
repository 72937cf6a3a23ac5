import itertools
from math import factorial

import numpy as np
import pytest

from p1rt0.quadrature import gauss_interval, triangle_rule


def monomial_integral(a, b):
    # integral of x^a y^b over the reference triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 6, 8, 12])
def test_triangle_rule_exact(degree):
    bary, w = triangle_rule(degree)
    assert np.isclose(w.sum(), 1.0)
    assert np.all(bary >= -1e-15)
    x, y = bary[:, 1], bary[:, 2]
    for a, b in itertools.product(range(degree + 1), repeat=2):
        if a + b <= degree:
            approx = 0.5 * np.sum(w * x ** a * y ** b)
            assert approx == pytest.approx(monomial_integral(a, b), rel=1e-12, abs=1e-15)


def test_degree6_rule_has_twelve_points():
    bary, _ = triangle_rule(6)
    assert bary.shape == (12, 3)


def test_rule_returns_copies():
    bary, w = triangle_rule(2)
    bary[:] = 0.0
    assert triangle_rule(2)[0].sum() == pytest.approx(3.0)


@pytest.mark.parametrize("npoints", [1, 2, 3, 5])
def test_gauss_interval(npoints):
    s, w = gauss_interval(npoints)
    for k in range(2 * npoints):
        assert np.sum(w * s ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)
