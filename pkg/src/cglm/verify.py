"""Invariant suites run by `cglm verify`. Each check returns a named pass/fail
with a short detail string; nothing here raises on a failed invariant."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import appendix
from .coefficients import (
    appendix1d_coefficient, constant_coefficient, constant_source, example1_coefficient,
    example1_effective, example2_coefficient, example2_exterior, verify_ellipticity,
)
from .errors import Box, difference_norms
from .fem import assemble_load, assemble_stiffness, energy, galerkin_residual, make_space, solve_problem
from .homogenization import effective_from_corrector, harmonic_mean_1d, solve_cell_problem
from .linalg import lanczos_ritz
from .mesh import Domain, RegionSpec, build_body_fitted_mesh, build_uniform_mesh
from .transition import HybridCoefficient, build_transition_2d

REGION = RegionSpec((0.5, 0.5), 0.05, 0.05)
UNIT = Domain.unit(2)


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.name} ({self.detail})"


def ellipticity_suite() -> list[Check]:
    fields = [
        constant_coefficient(1.0), constant_coefficient([[2.0, 0.5], [0.5, 1.0]]),
        example1_coefficient(eps=0.04), example1_coefficient(eps=0.01),
        example2_exterior(0.05), example2_coefficient(0.05, REGION),
    ]
    out = []
    for f in fields:
        r = verify_ellipticity(f, 10_000, 16)
        out.append(Check("ellipticity", f"{f.name} {f.params}", r.passed,
                         f"observed lam={r.lam_observed:.4g} >= {f.lam:.4g}, Lam={r.Lam_observed:.4g} <= {f.Lam:.4g}"))
    a1 = appendix1d_coefficient(0.01)
    r = verify_ellipticity(a1, 10_000, 1, domain=Domain.unit(1))
    out.append(Check("ellipticity", "appendix1d", r.passed, f"lam={r.lam_observed:.4g}, Lam={r.Lam_observed:.4g}"))
    # the blend stays in the class with the combined constants
    a = example1_coefficient(eps=0.04)
    hyb = HybridCoefficient(a, example1_effective(), build_transition_2d(REGION))
    hyb_field = type(a)("hybrid", 2, a.lam, a.Lam, lambda x, y: hyb(x), scalar=False)
    r = verify_ellipticity(hyb_field, 10_000, 16)
    out.append(Check("ellipticity", "hybrid blend", r.passed, f"lam={r.lam_observed:.4g}, Lam={r.Lam_observed:.4g}"))
    # periodicity of the two-scale form in its fast argument
    pts = np.random.default_rng(5).random((500, 2))
    y = a.fast_variable(pts)
    worst = max(float(np.max(np.abs(a.local(pts, y + e) - a.local(pts, y)))) for e in np.eye(2))
    out.append(Check("ellipticity", "example1 fast periodicity", worst <= 1e-12, f"max shift defect {worst:.2e}"))
    b = appendix1d_coefficient(0.01)
    x = np.linspace(0, 1, 500)[:, None]
    worst = float(np.max(np.abs(b.values(x + b.period) - b.values(x))))
    out.append(Check("ellipticity", "appendix1d fast periodicity", worst <= 1e-12, f"max shift defect {worst:.2e}"))
    return out


def conformity_suite() -> list[Check]:
    out = []
    uni = build_uniform_mesh(UNIT, 20)
    floor = 0.3 * float(uni.shape_ratios.min())
    cases = [("uniform 1/20", uni)]
    for hc, hf in ((1 / 10, 1 / 160), (1 / 20, 1 / 320), (1 / 10, 1 / 640), (1 / 20, 1 / 20)):
        cases.append((f"body-fitted {hc:g}/{hf:g}", build_body_fitted_mesh(UNIT, REGION, hc, hf)))
    for name, m in cases:
        _, counts = m.edges()
        area = float(m.measures.sum())
        ratio = float(m.shape_ratios.min())
        ok = counts.max() <= 2 and abs(area - 1.0) <= 1e-12 and ratio >= floor
        out.append(Check("conformity", name, bool(ok),
                         f"cells={m.n_cells}, max cells/edge={counts.max()}, area-1={area - 1:.1e}, shape={ratio:.4f}"))
    m = cases[2][1]
    pts = np.random.default_rng(11).random((1000, 2))
    idx, lam = m.locate(pts)
    rec = np.einsum("nk,nkd->nd", lam, m.vertices[m.cells[idx]])
    err = float(np.abs(rec - pts).max())
    out.append(Check("conformity", "locate then cell map is the identity", err <= 1e-12, f"{err:.1e}"))
    return out


def solver_suite(tol: float = 1e-10) -> list[Check]:
    out = []
    a = example1_coefficient(eps=0.04)
    A = example1_effective()
    mesh = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 80)
    coef = HybridCoefficient(a, A, build_transition_2d(mesh.metadata["region"]))
    f = constant_source(1.0)
    sol = solve_problem("hybrid", mesh, coef, f, tol)
    res = galerkin_residual(sol, coef, f)
    fnorm = float(np.linalg.norm(assemble_load(sol.space, f)[sol.space.free]))
    worst = float(np.abs(res).max())
    out.append(Check("fem", "Galerkin orthogonality", worst <= 10 * tol * fnorm,
                     f"max residual {worst:.2e} <= {10 * tol * fnorm:.2e}"))
    # coercivity floor: lam * (continuous Poincare constant) * smallest mass-matrix eigenvalue bound
    space = make_space(mesh)
    K = assemble_stiffness(space, coef)[space.free][:, space.free]
    ritz = float(lanczos_ritz(K, 20).min())
    floor = a.lam * math.pi**2 * 2 * float(mesh.measures.min()) / 12
    out.append(Check("fem", "coercivity (20-step Lanczos)", ritz >= floor > 0, f"Ritz {ritz:.3e} >= {floor:.3e}"))
    # energy grows under nested uniform refinement (exact assembly for a constant matrix)
    c = constant_coefficient([[2.0, 0.5], [0.5, 1.0]])
    energies = []
    for n in (4, 8, 16, 32):
        s = solve_problem("fine", build_uniform_mesh(UNIT, n), c, f, tol)
        energies.append(energy(s, c))
    ok = all(b > a_ for a_, b in zip(energies, energies[1:]))
    out.append(Check("fem", "energy monotone under refinement", ok, ", ".join(f"{e:.6f}" for e in energies)))
    # exactness with rho = 0: the hybrid stiffness is the homogenized one
    zero = HybridCoefficient(a, A, lambda x: np.zeros(len(x)))
    d = abs(assemble_stiffness(space, zero) - assemble_stiffness(space, A)).max()
    out.append(Check("fem", "rho = 0 gives the homogenized stiffness", d <= 1e-12, f"max entry diff {d:.1e}"))
    return out


def cell_suite() -> list[Check]:
    out = []
    a = example1_coefficient(eps=0.04)
    for name, cell in (("example1 cell", a.cell([0.3, 0.7])), ("example2 exterior cell", example2_exterior(0.05).cell([0.2, 0.8]))):
        sol = solve_cell_problem(cell, 64)
        means = [abs(sol.mean(j)) for j in range(2)]
        out.append(Check("cell", f"{name} corrector zero mean", max(means) <= 1e-8, f"max |mean| {max(means):.1e}"))
        B = effective_from_corrector(sol)
        ev = np.linalg.eigvalsh(0.5 * (B + B.T))
        vals = cell(sol.mesh.centroids)[:, 0, 0]
        w = sol.mesh.measures
        arith = float(np.sum(w * vals))
        harm = 1.0 / float(np.sum(w / vals))
        ok = harm - 1e-3 <= ev.min() and ev.max() <= arith + 1e-3
        out.append(Check("cell", f"{name} Voigt-Reuss bounds", ok,
                         f"{harm:.4f} <= {ev.min():.4f}, {ev.max():.4f} <= {arith:.4f}"))
    A = harmonic_mean_1d(lambda y: 2 + np.sin(2 * math.pi * y))
    out.append(Check("cell", "harmonic mean of 2 + sin is sqrt 3", abs(A - math.sqrt(3)) <= 1e-10, f"{A - math.sqrt(3):.1e}"))
    return out


def error_metric_suite() -> list[Check]:
    out = []
    f = constant_source(1.0)
    c = constant_coefficient(1.0)
    ref = build_uniform_mesh(UNIT, 64)
    sols = [solve_problem("fine", m, c, f) for m in (
        build_uniform_mesh(UNIT, 8), build_uniform_mesh(UNIT, 16),
        build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 40))]
    box = Box.outside_k(REGION)
    d = lambda u, v: difference_norms(u, v, ref, box)
    zero = d(sols[0], sols[0])
    out.append(Check("errors", "zero on identical inputs", zero.h1 == 0.0, f"{zero.h1:.1e}"))
    sym = max(abs(d(u, v).h1 - d(v, u).h1) for u in sols for v in sols)
    out.append(Check("errors", "symmetry", sym <= 1e-10, f"max asymmetry {sym:.1e}"))
    u, v, w = sols
    for norm in ("l2", "h1", "h1semi"):
        lhs = d(u, w).get(norm)
        rhs = d(u, v).get(norm) + d(v, w).get(norm)
        out.append(Check("errors", f"triangle inequality ({norm})", lhs <= rhs + 1e-10, f"{lhs:.4e} <= {rhs:.4e}"))
    nv = d(u, v)
    out.append(Check("errors", "H1 >= H1 seminorm >= 0", nv.h1 >= nv.h1_semi >= 0, f"{nv.h1:.4e} >= {nv.h1_semi:.4e}"))
    return out


def appendix_suite() -> list[Check]:
    out = []
    for s in appendix.coarse_regime_setups() + appendix.fine_regime_setups():
        b = appendix.element_means(s)
        v = appendix.solve_1d_exact(b, s.h)
        c = np.diff(v) * b / s.h
        dev = float(np.abs(c - 1).max())
        ok = dev <= 1e-12 and np.all(np.diff(v) > 0) and appendix.left_error(s, v) <= 1e-12
        out.append(Check("appendix", f"flux c_j = 1 ({s.regime}, M={s.M})", bool(ok), f"max |c_j - 1| {dev:.1e}"))
    return out


def transition_suite() -> list[Check]:
    out = []
    rho = build_transition_2d(REGION)
    rng = np.random.default_rng(2)
    lo, hi = REGION.k_box()
    p = lo + (hi - lo) * rng.random((5000, 2))
    q = p + 0.01 * (rng.random((5000, 2)) - 0.5)
    lip = rho.gradient_constant / REGION.collar
    ratio = float(np.max(np.abs(rho(p) - rho(q)) / np.linalg.norm(p - q, axis=1)))
    out.append(Check("transition", "rho Lipschitz with C / delta", ratio <= lip * (1 + 1e-12), f"{ratio:.3f} <= {lip:.3f}"))
    a = example1_coefficient(eps=0.04)
    A = example1_effective()
    chi = build_transition_2d(REGION, "characteristic")
    x = rng.random((5000, 2))
    hyb = HybridCoefficient(a, A, chi)(x)
    inside = chi(x).astype(bool)
    expect = np.where(inside[:, None, None], a(x), A(x))
    dev = float(np.abs(hyb - expect).max())
    out.append(Check("transition", "characteristic blend is chi a + (1 - chi) A", dev == 0.0, f"{dev:.1e}"))
    return out


SUITES = {
    "ellipticity": ellipticity_suite,
    "conformity": conformity_suite,
    "fem": solver_suite,
    "cell": cell_suite,
    "errors": error_metric_suite,
    "appendix": appendix_suite,
    "transition": transition_suite,
}


def run_suites(names=None, tol: float = 1e-10) -> tuple[list[Check], dict]:
    checks, timing = [], {}
    for name in names or SUITES:
        t0 = time.perf_counter()
        fn = SUITES[name]
        checks += fn(tol) if name == "fem" else fn()
        timing[name] = time.perf_counter() - t0
    return checks, timing
