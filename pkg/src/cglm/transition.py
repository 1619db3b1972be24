"""Transition functions rho and the blended coefficient rho * a + (1 - rho) * A_h."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import RegionSpec, in_box

SMOOTH = "smooth"
CHARACTERISTIC = "characteristic"
PIECEWISE_LINEAR = "piecewise-linear"


@dataclass(frozen=True)
class GammaProfile:
    """Even C1 profile: 1 on [-L, L], cubic smoothstep down to 0 at |t| = L + delta."""

    L: float
    delta: float

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive; use the characteristic transition for delta = 0")

    def __call__(self, t) -> np.ndarray:
        s = np.clip((np.abs(np.asarray(t, dtype=float)) - self.L) / self.delta, 0.0, 1.0)
        return 1 - 3 * s**2 + 2 * s**3

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.clip((np.abs(t) - self.L) / self.delta, 0.0, 1.0)
        return np.sign(t) * (-6 * s + 6 * s**2) / self.delta

    @property
    def max_slope(self) -> float:
        return 1.5 / self.delta


def build_gamma_profile(L: float, delta: float) -> GammaProfile:
    return GammaProfile(L, delta)


@dataclass(frozen=True)
class TransitionFunction:
    kind: str
    region: RegionSpec
    evaluator: Callable[[np.ndarray], np.ndarray]
    gradient_constant: float | None = None  # C in |grad rho| <= C / d
    meta: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.region.dim)
        return self.evaluator(x)

    @property
    def support_measure(self) -> float:
        return self.meta.get("K_measure", self.region.k_measure)


def build_transition_2d(region: RegionSpec, kind: str = SMOOTH) -> TransitionFunction:
    c = np.array(region.center)
    if kind == CHARACTERISTIC:
        lo, hi = region.k0_box()
        return TransitionFunction(
            kind, region, lambda x: in_box(x, lo, hi, tol=0.0).astype(float),
            meta={"K_measure": (2 * region.half_width) ** region.dim},
        )
    if kind != SMOOTH:
        raise ValueError(f"unknown transition kind {kind!r}")
    g = GammaProfile(region.half_width, region.collar)

    def rho(x):
        return np.prod(g(x - c), axis=1)

    # |grad rho| <= max|gamma'| and the separation d equals delta
    return TransitionFunction(kind, region, rho, gradient_constant=1.5,
                              meta={"K_measure": region.k_measure})


def build_transition_appendix(L: float, h: float, N: int) -> TransitionFunction:
    """Piecewise-linear rho on the uniform 2N-cell partition of (0, 1), supported in 1/2 +- 2L."""
    M = round(L / h)
    if M < 1 or abs(M * h - L) > 1e-12 * max(1.0, L / h):
        raise ValueError(f"L={L} must be an integer multiple of h={h}")
    if abs(2 * N * h - 1) > 1e-12:
        raise ValueError("h must equal 1/(2N)")
    if 2 * M > N:
        raise ValueError("support 1/2 +- 2L must fit in (0, 1)")
    x = lambda k: k * h
    a, b, c, d = x(N - 2 * M), x(N - M), x(N + M), x(N + 2 * M)

    def rho(pts):
        t = np.asarray(pts, dtype=float).reshape(len(pts), -1)[:, 0]
        return np.interp(t, [0.0, a, b, c, d, 1.0], [0.0, 0.0, 1.0, 1.0, 0.0, 0.0])

    region = RegionSpec((0.5,), L, L)
    return TransitionFunction(PIECEWISE_LINEAR, region, rho, gradient_constant=1.0,
                              meta={"K_measure": 4 * L, "M": M, "N": N, "h": h,
                                    "breakpoints": [a, b, c, d]})


@dataclass(frozen=True)
class HybridCoefficient:
    micro: Callable[[np.ndarray], np.ndarray]
    effective: Callable[[np.ndarray], np.ndarray]
    transition: Callable[[np.ndarray], np.ndarray]
    dim: int = 2
    symmetric: bool = True

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.dim)
        rho = np.asarray(self.transition(x), dtype=float)
        out = np.zeros((len(x), self.dim, self.dim))
        on = rho > 0
        off = rho < 1
        # the micro field is only evaluated where rho > 0
        if on.any():
            out[on] += rho[on, None, None] * self.micro(x[on])
        if off.any():
            out[off] += (1 - rho[off])[:, None, None] * self.effective(x[off])
        return out


def blend(hybrid: HybridCoefficient, x) -> np.ndarray:
    return hybrid(x)
