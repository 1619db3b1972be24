"""Reference-simplex quadrature rules (weights normalised to sum to one)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_A4, _W4a = 0.445948490915965, 0.223381589678011
_B4, _W4b = 0.091576213509771, 0.109951743655322
_A5, _W5a = 0.059715871789770, 0.132394152788506
_B5, _W5b = 0.797426985353087, 0.125939180544827


def _sym3(a: float) -> list[tuple[float, float]]:
    # barycentric (a, a, 1-2a) and its rotations, as (lambda1, lambda2)
    return [(a, a), (1 - 2 * a, a), (a, 1 - 2 * a)]


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points in reference coordinates (lambda1, lambda2) and weights, exact to `order`."""
    if order <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([1.0])
    if order == 2:
        return np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]), np.full(3, 1 / 3)
    if order in (3, 4):
        pts = _sym3(_A4) + _sym3(_B4)
        w = [_W4a] * 3 + [_W4b] * 3
        return np.array(pts), np.array(w)
    if order == 5:
        b1 = (1 - _A5) / 2
        b2 = (1 - _B5) / 2
        pts = [(1 / 3, 1 / 3)] + _sym3(b1) + _sym3(b2)
        w = [0.225] + [_W5a] * 3 + [_W5b] * 3
        return np.array(pts), np.array(w)
    raise ValueError(f"unsupported triangle quadrature order {order} (1-5)")


@lru_cache(maxsize=None)
def interval_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order < 0:
        raise ValueError("quadrature order must be non-negative")
    n = max(1, (order + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return ((x + 1) / 2)[:, None], w / 2


def reference_rule(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    if dim == 1:
        return interval_rule(order)
    if dim == 2:
        return triangle_rule(order)
    raise ValueError("only 1D and 2D simplices are supported")
