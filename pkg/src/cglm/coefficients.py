"""Microscopic coefficient fields and ellipticity checks.

Fields are evaluated on point arrays of shape (m, dim) and return matrices of
shape (m, dim, dim). Locally periodic fields also expose their two-scale form
a(x, y), periodic in y with unit period, with y = x / period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .mesh import Domain, RegionSpec, in_box

TWO_PI = 2 * math.pi


def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, dim) if dim > 1 else pts[:, None]
    return pts


@dataclass(frozen=True)
class CoefficientField:
    name: str
    dim: int
    lam: float
    Lam: float
    local: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (x, y) -> (m,) or (m, d, d)
    period: float | None = None
    scalar: bool = True
    symmetric: bool = True
    params: dict = field(default_factory=dict)

    def fast_variable(self, x: np.ndarray) -> np.ndarray:
        return x / self.period if self.period else x

    def values(self, x) -> np.ndarray:
        """Raw values: (m,) for scalar fields, (m, d, d) otherwise."""
        pts = _as_points(x, self.dim)
        return self.local(pts, self.fast_variable(pts))

    def __call__(self, x) -> np.ndarray:
        v = self.values(x)
        if self.scalar:
            return v[:, None, None] * np.eye(self.dim)
        return v

    def cell(self, x0) -> Callable[[np.ndarray], np.ndarray]:
        """The coefficient on the unit cell with the slow variable frozen at x0."""
        if self.period is None:
            raise ValueError(f"field {self.name!r} has no periodic fast variable")
        x0 = np.asarray(x0, dtype=float).reshape(1, self.dim)

        def frozen(y):
            y = _as_points(y, self.dim)
            v = self.local(np.broadcast_to(x0, y.shape), y)
            return v[:, None, None] * np.eye(self.dim) if self.scalar else v

        return frozen


def constant_coefficient(value=1.0, dim: int = 2) -> CoefficientField:
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.size == 1:
        c = float(m.ravel()[0])
        if c <= 0:
            raise ValueError("constant coefficient must be positive")
        return CoefficientField("constant", dim, c, c, lambda x, y: np.full(len(x), c),
                                period=1.0, params={"value": c})
    if m.shape != (dim, dim):
        raise ValueError("matrix coefficient has the wrong shape")
    sym = 0.5 * (m + m.T)
    lam = float(np.linalg.eigvalsh(sym).min())
    if lam <= 0:
        raise ValueError("matrix coefficient is not elliptic")
    # xi.m xi >= |m xi|^2 / Lam  holds with Lam = max |m xi|^2 / xi.m xi
    Lam = float(np.linalg.norm(m, 2) ** 2 / lam)
    mm = m.copy()
    return CoefficientField("constant", dim, lam, Lam,
                            lambda x, y: np.broadcast_to(mm, (len(x), dim, dim)).copy(),
                            period=1.0, scalar=False, symmetric=bool(np.allclose(m, m.T)),
                            params={"value": m.tolist()})


def example1_coefficient(R1: float = 2.5, R2: float = 1.5, eps: float = 0.01) -> CoefficientField:
    """Separable two-scale field; (R1 + R2 sin 2pi x1)(R1 + R2 cos 2pi x2) over the fast product."""
    if not R1 > R2 >= 0:
        raise ValueError(f"need R1 > R2 >= 0 for ellipticity, got R1={R1}, R2={R2}")
    if eps <= 0:
        raise ValueError("eps must be positive")

    def local(x, y):
        slow = (R1 + R2 * np.sin(TWO_PI * x[:, 0])) * (R1 + R2 * np.cos(TWO_PI * x[:, 1]))
        fast = (R1 + R2 * np.sin(TWO_PI * y[:, 0])) * (R1 + R2 * np.sin(TWO_PI * y[:, 1]))
        return slow / fast

    lo, hi = (R1 - R2) ** 2, (R1 + R2) ** 2
    return CoefficientField("example1", 2, lo / hi, hi / lo, local, period=eps,
                            params={"R1": R1, "R2": R2, "eps": eps})


def example1_effective(R1: float = 2.5, R2: float = 1.5):
    """Closed-form homogenized matrix of example1 as a point evaluator."""

    def A(x):
        x = _as_points(x, 2)
        s = (R1 + R2 * np.sin(TWO_PI * x[:, 0])) * (R1 + R2 * np.cos(TWO_PI * x[:, 1]))
        return (s / (R1 * math.sqrt(R1**2 - R2**2)))[:, None, None] * np.eye(2)

    return A


def unstructured_field(x: np.ndarray) -> np.ndarray:
    """The scale-free field used inside K0 for example2 (values in [3 - 5/7, 3 + 5/7])."""
    x1, x2 = x[:, 0], x[:, 1]
    total = np.zeros(len(x))
    for j in range(5):
        for i in range(j + 1):
            arg = np.floor(8 * (i * x2 - x1 / (i + 1))) + np.floor(150 * i * x1) + np.floor(150 * x2)
            total += np.cos(arg) / (j + 1)
    return 3 + total / 7


def example2_exterior(eps: float = 0.0063) -> CoefficientField:
    """Locally periodic field 2.1 + cos(2pi y1) cos(2pi y2) + sin(4 x1^2 x2^2)."""
    if eps <= 0:
        raise ValueError("eps must be positive")

    def local(x, y):
        return 2.1 + np.cos(TWO_PI * y[:, 0]) * np.cos(TWO_PI * y[:, 1]) + np.sin(4 * x[:, 0] ** 2 * x[:, 1] ** 2)

    return CoefficientField("example2-exterior", 2, 0.1, 4.1, local, period=eps, params={"eps": eps})


def example2_coefficient(eps: float, region: RegionSpec) -> CoefficientField:
    """Unstructured field inside K0, locally periodic field outside."""
    ext = example2_exterior(eps)
    k0_lo, k0_hi = region.k0_box()

    def local(x, y):
        inside = in_box(x, k0_lo, k0_hi, tol=0.0)
        out = ext.local(x, y)
        if inside.any():
            out[inside] = unstructured_field(x[inside])
        return out

    return CoefficientField("example2", 2, 0.1, 4.1, local, period=eps,
                            params={"eps": eps, "L": region.half_width, "center": list(region.center)})


def appendix1d_coefficient(eps: float) -> CoefficientField:
    """2 + sin(x / eps): unit-period fast form 2 + sin(2 pi y) with y = x / (2 pi eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return CoefficientField("appendix1d", 1, 1.0, 3.0, lambda x, y: 2 + np.sin(TWO_PI * y[:, 0]),
                            period=TWO_PI * eps, params={"eps": eps})


REGISTRY: dict[str, Callable[..., CoefficientField]] = {
    "constant": constant_coefficient,
    "example1": example1_coefficient,
    "example2": example2_coefficient,
    "appendix1d": appendix1d_coefficient,
}


def make_coefficient(name: str, **params) -> CoefficientField:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown coefficient model {name!r}; known: {sorted(REGISTRY)}") from None
    return factory(**params)


# --- sources ----------------------------------------------------------------


@dataclass(frozen=True)
class SourceTerm:
    evaluator: Callable[[np.ndarray], np.ndarray]
    support: tuple | None = None  # optional (lo, hi) box

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        v = np.asarray(self.evaluator(x), dtype=float)
        v = np.broadcast_to(v, (len(x),)).copy()
        if self.support is not None:
            v[~in_box(x, *self.support, tol=0.0)] = 0.0
        return v


def constant_source(value: float = 1.0, support=None) -> SourceTerm:
    return SourceTerm(lambda x: np.full(len(x), float(value)), support)


# --- ellipticity ------------------------------------------------------------


@dataclass
class EllipticityReport:
    lam_observed: float
    Lam_observed: float
    passed: bool
    witness: np.ndarray | None = None


def sample_points(domain: Domain, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic scrambled Halton points in the domain."""
    if count < 1:
        raise ValueError("sample_count must be at least 1")
    u = qmc.Halton(d=domain.dim, scramble=True, seed=seed).random(count)
    return qmc.scale(u, domain.lower, domain.upper)


def unit_directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1))
    t = np.pi * np.arange(count) / count
    return np.column_stack([np.cos(t), np.sin(t)])


def verify_ellipticity(field, sample_count: int = 10_000, directions: int = 16,
                       domain: Domain | None = None, lam: float | None = None,
                       Lam: float | None = None, seed: int = 0) -> EllipticityReport:
    """Check xi.a xi >= lam |xi|^2 and xi.a xi >= |a xi|^2 / Lam on a fixed sample set."""
    dim = field.dim
    domain = domain or Domain.unit(dim)
    lam = field.lam if lam is None else lam
    Lam = field.Lam if Lam is None else Lam
    pts = sample_points(domain, sample_count, seed)
    a = field(pts)
    xi = unit_directions(dim, directions)
    axi = np.einsum("mij,kj->mki", a, xi)  # (m, k, d)
    q = np.einsum("ki,mki->mk", xi, axi)
    sq = np.einsum("mki,mki->mk", axi, axi)
    lam_obs = float(q.min())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0, sq / q, np.inf)
    Lam_obs = float(ratio.max())
    bad = (q < lam * (1 - 1e-12)) | (q * Lam < sq * (1 - 1e-12))
    witness = pts[np.argmax(bad.any(axis=1))] if bad.any() else None
    return EllipticityReport(lam_obs, Lam_obs, witness is None, witness)
