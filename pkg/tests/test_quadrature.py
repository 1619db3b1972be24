import math

import numpy as np
import pytest

from cglm.quadrature import interval_rule, reference_rule, triangle_rule


def _monomial_triangle(i, j):
    # int_T x^i y^j over the unit reference triangle, normalised by |T| = 1/2
    return 2 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
def test_triangle_rule_exactness(order):
    pts, w = triangle_rule(order)
    assert w.sum() == pytest.approx(1.0)
    for i in range(order + 1):
        for j in range(order + 1 - i):
            got = np.sum(w * pts[:, 0] ** i * pts[:, 1] ** j)
            assert got == pytest.approx(_monomial_triangle(i, j), abs=1e-14)


def test_triangle_rule_rejects_unsupported():
    with pytest.raises(ValueError):
        triangle_rule(9)


@pytest.mark.parametrize("order", [1, 4, 10])
def test_interval_rule(order):
    pts, w = interval_rule(order)
    for k in range(order + 1):
        assert np.sum(w * pts[:, 0] ** k) == pytest.approx(1 / (k + 1))


def test_reference_rule_dispatch():
    assert reference_rule(1, 3)[0].shape[1] == 1
    assert reference_rule(2, 3)[0].shape[1] == 2
