"""Quadrature rules on the reference triangle and on the reference interval.

Triangle rules are returned in barycentric form: ``(bary, weights)`` with
``bary`` of shape ``(nq, 3)`` and weights summing to one, so that
``integral over T of g  ~=  |T| * sum_q w_q g(x_q)``.

Interval rules live on ``[0, 1]`` and also have weights summing to one.
"""
from functools import lru_cache

import numpy as np


def _orbit3(a, b, w):
    return [(a, b, b), (b, a, b), (b, b, a)], [w] * 3


def _orbit6(a, b, c, w):
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _dunavant6():
    # 12-point rule of degree 6 (Dunavant 1985).
    pts, wts = [], []
    for p, w in (
        _orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379),
        _orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207),
        _orbit6(0.053145049844817, 0.310352451033784, 0.636502499121399,
                0.082851075618374),
    ):
        pts += p
        wts += w
    bary = np.array(pts)
    bary /= bary.sum(axis=1, keepdims=True)
    w = np.array(wts)
    return bary, w / w.sum()


def _collapsed_gauss(degree):
    """Duffy-collapsed tensor Gauss-Legendre rule, exact to ``degree``."""
    n = degree // 2 + 1
    xg, wg = np.polynomial.legendre.leggauss(n)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    s, t = np.meshgrid(xg, xg, indexing="ij")
    ws, wt = np.meshgrid(wg, wg, indexing="ij")
    # (s, t) in unit square -> (x, y) = (s, t (1 - s)), Jacobian (1 - s)
    x = s.ravel()
    y = (t * (1.0 - s)).ravel()
    w = (ws * wt * (1.0 - s)).ravel() * 2.0
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, w / w.sum()


@lru_cache(maxsize=None)
def _triangle_rule(degree):
    if degree <= 1:
        return np.array([[1.0, 1.0, 1.0]]) / 3.0, np.array([1.0])
    if degree == 2:
        # edge midpoints
        bary = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
        return bary, np.full(3, 1.0 / 3.0)
    if degree <= 6:
        return _dunavant6()
    return _collapsed_gauss(degree)


def triangle_rule(degree):
    """Return ``(bary, weights)`` integrating polynomials of ``degree`` exactly."""
    bary, w = _triangle_rule(int(degree))
    return bary.copy(), w.copy()


def gauss_interval(npoints):
    """Gauss-Legendre points and weights on ``[0, 1]``.

    ``npoints`` points integrate polynomials of degree ``2 * npoints - 1``.
    """
    x, w = np.polynomial.legendre.leggauss(int(npoints))
    return 0.5 * (x + 1.0), 0.5 * w
