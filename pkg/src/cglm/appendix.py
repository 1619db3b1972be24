"""The explicit 1D example showing that the |K|^(1/2) factor is sharp.

Problem: -(a u')' = 0 on (0, 1), u(0) = 0, a u'(1) = 1 with a = 2 + sin(x / eps),
homogenized coefficient A = sqrt(3) and u0(x) = x / A. The hybrid coefficient uses
a piecewise-linear rho supported in 1/2 +- 2L on the uniform 2N-cell mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import piecewise_constant_1d, solve_1d_exact, solve_problem
from .mesh import Domain, build_uniform_mesh
from .transition import TransitionFunction, build_transition_appendix

A_EFF = math.sqrt(3.0)
COARSE = "h>>eps"
FINE = "h<<eps"
COARSE_LIMIT = (2 - A_EFF) / (4 * math.sqrt(3))  # eps / h must not exceed this


class RegimeError(ValueError):
    pass


@dataclass(frozen=True)
class AppendixSetup:
    N: int
    M: int
    eps: float
    regime: str = COARSE

    @property
    def h(self) -> float:
        return 1.0 / (2 * self.N)

    @property
    def L(self) -> float:
        return self.M * self.h

    @property
    def K_measure(self) -> float:
        return 4 * self.L

    @property
    def phi(self) -> float:
        return 2 * self.h / self.eps

    def validate(self) -> None:
        if self.M < 3:
            raise RegimeError(f"M={self.M} violates M >= 3")
        if 2 * self.M > self.N:
            raise RegimeError("L < 1/4 is required (2M <= N)")
        if self.regime == COARSE:
            if self.eps / self.h > COARSE_LIMIT:
                raise RegimeError(
                    f"eps/h = {self.eps / self.h:.4g} violates eps/h <= (2 - A)/(4 sqrt 3) = {COARSE_LIMIT:.4g}")
        elif self.regime == FINE:
            if not self.h < self.eps:
                raise RegimeError(f"h={self.h} is not below eps={self.eps}")
            bound = 5 * math.pi * self.eps / (2 * self.M)
            if not self.h > bound:
                raise RegimeError(f"h={self.h:.4g} violates h > 5 pi eps / (2M) = {bound:.4g}")
        else:
            raise RegimeError(f"unknown regime {self.regime!r}")

    def transition(self) -> TransitionFunction:
        return build_transition_appendix(self.L, self.h, self.N)


def element_means(setup: AppendixSetup, rho: TransitionFunction | None = None) -> np.ndarray:
    """Exact cell means b_j of rho (2 + sin(x/eps)) + (1 - rho) A over the 2N cells."""
    rho = rho or setup.transition()
    h, eps = setup.h, setup.eps
    x = np.arange(2 * setup.N + 1) * h
    a, b = x[:-1], x[1:]
    r0, r1 = rho(a[:, None]), rho(b[:, None])
    beta = (r1 - r0) / h
    # int_a^b (r0 + beta (x - a)) sin(x / eps) dx
    ca, cb = np.cos(a / eps), np.cos(b / eps)
    sa, sb = np.sin(a / eps), np.sin(b / eps)
    osc = -r0 * eps * (cb - ca) + beta * (-eps * h * cb + eps**2 * (sb - sa))
    return A_EFF + (2 - A_EFF) * (r0 + r1) / 2 + osc / h


def expansion_terms(setup: AppendixSetup) -> tuple[np.ndarray, float]:
    """Leading terms of b_{N-2M+j} - A on the left ramp (j = 1..M) and the remainder bound 2 eps / L."""
    h, eps, L, M, N = setup.h, setup.eps, setup.L, setup.M, setup.N
    j = np.arange(1, M + 1)
    mid = (N - 2 * M + j - 0.5) * h
    lead = (2 - A_EFF) * h * (2 * j - 1) / (2 * L) + 2 * j * eps / L * math.sin(h / (2 * eps)) * np.sin(mid / eps)
    return lead, 2 * eps / L


def discrete_solution(setup: AppendixSetup) -> np.ndarray:
    return solve_1d_exact(element_means(setup), setup.h)


def fem_solution(setup: AppendixSetup, b: np.ndarray | None = None) -> np.ndarray:
    """The same discrete problem through general 1D P1 assembly with per-cell means."""
    b = element_means(setup) if b is None else b
    mesh = build_uniform_mesh(Domain.unit(1), 2 * setup.N)
    left = np.isclose(mesh.vertices[:, 0], 0.0)
    right = int(np.argmax(mesh.vertices[:, 0]))
    sol = solve_problem("hybrid", mesh, piecewise_constant_1d(mesh, b), None, dirichlet=left,
                        neumann={right: 1.0}, order=0)
    return sol.values[np.argsort(mesh.vertices[:, 0])]


def ramp_error(setup: AppendixSetup, v: np.ndarray | None = None) -> float:
    """||u0' - v_h'|| in L2(1/2 - 2L, 1/2 - L); both are linear on each cell."""
    v = discrete_solution(setup) if v is None else v
    h, N, M = setup.h, setup.N, setup.M
    slopes = np.diff(v) / h
    cells = slice(N - 2 * M, N - M)  # I_{N-2M+1} .. I_{N-M}
    return float(math.sqrt(h * np.sum((1 / A_EFF - slopes[cells]) ** 2)))


def left_error(setup: AppendixSetup, v: np.ndarray | None = None) -> float:
    """max |u0 - v_h| at the nodes of [0, 1/2 - 2L] (zero: both are the same line)."""
    v = discrete_solution(setup) if v is None else v
    k = setup.N - 2 * setup.M
    x = np.arange(k + 1) * setup.h
    return float(np.max(np.abs(x / A_EFF - v[: k + 1])))


def lower_bound(setup: AppendixSetup) -> float:
    """Proven lower bound on the ramp error for the setup's regime."""
    if setup.regime == COARSE:
        return (2 - A_EFF) / (36 * math.sqrt(2)) * math.sqrt(setup.K_measure)
    c = (1 / math.pi + A_EFF - 2) ** 2 / 6 - 4 * setup.eps**2 / setup.L**2
    return math.sqrt(max(c, 0.0) * setup.L / 27)


@dataclass
class SharpnessResult:
    L: list[float]
    K_measure: list[float]
    errors: list[float]
    bounds: list[float]
    slope: float
    regime: str

    def to_csv(self) -> str:
        lines = ["L,K_measure,error,lower_bound"]
        lines += [f"{l!r},{k!r},{e!r},{b!r}" for l, k, e, b in zip(self.L, self.K_measure, self.errors, self.bounds)]
        return "\n".join(lines) + "\n"


def lower_bound_experiment(setups: list[AppendixSetup]) -> SharpnessResult:
    """Ramp errors and the least-squares slope of log(error) against log|K|."""
    for s in setups:
        s.validate()
    errs = [ramp_error(s) for s in setups]
    K = [s.K_measure for s in setups]
    slope = float(np.polyfit(np.log(K), np.log(errs), 1)[0])
    regimes = {s.regime for s in setups}
    return SharpnessResult([s.L for s in setups], K, errs, [lower_bound(s) for s in setups], slope,
                           regimes.pop() if len(regimes) == 1 else "mixed")


def coarse_regime_setups(N: int = 128, eps_over_h: float = 0.03,
                         Ls=(1 / 64, 1 / 32, 1 / 16, 1 / 8)) -> list[AppendixSetup]:
    h = 1 / (2 * N)
    return [AppendixSetup(N, round(L / h), eps_over_h * h, COARSE) for L in Ls]


def fine_regime_setups(N: int = 1024, eps: float = 0.0015,
                       Ls=(1 / 64, 1 / 32, 1 / 16, 1 / 8)) -> list[AppendixSetup]:
    h = 1 / (2 * N)
    return [AppendixSetup(N, round(L / h), eps, FINE) for L in Ls]
