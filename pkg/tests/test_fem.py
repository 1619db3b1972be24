import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from cglm.coefficients import constant_coefficient, constant_source, example1_coefficient, example1_effective
from cglm.fem import (
    assemble_load, assemble_stiffness, energy, galerkin_residual, make_space, piecewise_constant_1d,
    solve_1d_exact, solve_problem,
)
from cglm.linalg import banded_solve, lanczos_ritz, pcg, solve_linear
from cglm.mesh import Domain, RegionSpec, build_body_fitted_mesh, build_uniform_mesh
from cglm.transition import HybridCoefficient, build_transition_2d

UNIT = Domain.unit(2)
REGION = RegionSpec((0.5, 0.5), 0.05, 0.05)


def test_constant_b_gives_line():
    v = solve_1d_exact(np.full(8, 2.0), 1 / 8)
    assert np.allclose(v, np.arange(9) / 8 / 2.0)


def test_alternating_b():
    h = 1 / 10
    b = np.array([1.0, 2.0] * 5)
    v = solve_1d_exact(b, h)
    j = np.arange(11)
    assert np.allclose(v, h * (np.ceil(j / 2) * 1 + np.floor(j / 2) * 0.5))


def test_1d_general_assembly_matches_closed_form():
    rng = np.random.default_rng(4)
    n = 64
    b = 1 + 2 * rng.random(n)
    mesh = build_uniform_mesh(Domain.unit(1), n)
    x = mesh.vertices[:, 0]
    sol = solve_problem("fine", mesh, piecewise_constant_1d(mesh, b), None,
                        dirichlet=np.isclose(x, 0), neumann={int(np.argmax(x)): 1.0}, order=0)
    v = sol.values[np.argsort(x)]
    assert np.allclose(v, solve_1d_exact(b, 1 / n), rtol=1e-13, atol=0)


def test_stiffness_row_sums_and_symmetry():
    mesh = build_uniform_mesh(UNIT, 6)
    K = assemble_stiffness(mesh, example1_coefficient(eps=0.2))
    assert abs(K - K.T).max() <= 1e-12
    assert np.abs(K @ np.ones(mesh.n_vertices)).max() <= 1e-12


def test_linear_solution_reproduced():
    mesh = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 40)
    g = mesh.vertices[:, 0] - 3 * mesh.vertices[:, 1]
    c = constant_coefficient([[2.0, 0.3], [0.3, 1.0]])
    sol = solve_problem("fine", mesh, c, constant_source(0.0), dirichlet_values=g)
    assert np.abs(sol.values - g).max() <= 1e-9


def test_poisson_convergence_rate():
    # -lap u = 2 pi^2 sin sin, u = sin(pi x) sin(pi y)
    f = lambda x: 2 * np.pi**2 * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
    u = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
    errs = []
    for n in (8, 16, 32):
        mesh = build_uniform_mesh(UNIT, n)
        sol = solve_problem("fine", mesh, constant_coefficient(1.0), f)
        errs.append(np.abs(sol.values - u(mesh.vertices)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_galerkin_orthogonality_and_energy():
    mesh = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 80)
    coef = HybridCoefficient(example1_coefficient(eps=0.04), example1_effective(), build_transition_2d(REGION))
    f = constant_source(1.0)
    sol = solve_problem("hybrid", mesh, coef, f, tol=1e-10)
    F = assemble_load(sol.space, f)[sol.space.free]
    assert np.abs(galerkin_residual(sol, coef, f)).max() <= 10 * 1e-10 * np.linalg.norm(F)
    assert energy(sol, coef) == pytest.approx(F @ sol.values[sol.space.free], rel=1e-8)


def test_rho_zero_equals_homogenized_stiffness():
    mesh = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 40)
    A = example1_effective()
    zero = HybridCoefficient(example1_coefficient(eps=0.04), A, lambda x: np.zeros(len(x)))
    assert abs(assemble_stiffness(mesh, zero) - assemble_stiffness(mesh, A)).max() <= 1e-12


def test_coercivity_floor():
    mesh = build_uniform_mesh(UNIT, 16)
    a = example1_coefficient(eps=0.1)
    space = make_space(mesh)
    K = assemble_stiffness(space, a)[space.free][:, space.free]
    floor = a.lam * 2 * np.pi**2 * mesh.measures.min() / 12
    assert lanczos_ritz(K, 20).min() >= floor


def test_energy_increases_under_refinement():
    c = constant_coefficient(1.0)
    e = [energy(solve_problem("fine", build_uniform_mesh(UNIT, n), c, constant_source(1.0)), c) for n in (4, 8, 16)]
    assert e[0] < e[1] < e[2]


def test_unknown_kind():
    with pytest.raises(ValueError):
        solve_problem("coarse", build_uniform_mesh(UNIT, 2), constant_coefficient(1.0), None)


@given(st.integers(2, 40), st.integers(0, 10_000))
def test_1d_flux_constant(n, seed):
    b = 0.5 + 3 * np.random.default_rng(seed).random(n)
    v = solve_1d_exact(b, 1 / n)
    assert np.allclose(np.diff(v) * b * n, 1.0, rtol=1e-13)
    assert np.all(np.diff(v) > 0)


@given(st.integers(0, 1000))
def test_pcg_matches_direct(seed):
    rng = np.random.default_rng(seed)
    n = 30
    B = sp.random(n, n, density=0.2, random_state=seed)
    A = (B @ B.T + n * sp.identity(n)).tocsr()
    b = rng.standard_normal(n)
    x, info = pcg(A, b, tol=1e-12)
    assert np.allclose(x, spla.spsolve(A.tocsc(), b), rtol=1e-9, atol=1e-12)
    assert info.residual <= 1e-12


def test_amg_path_and_banded():
    mesh = build_uniform_mesh(UNIT, 80)
    space = make_space(mesh)
    K = assemble_stiffness(space, example1_coefficient(eps=0.05))[space.free][:, space.free]
    b = np.ones(K.shape[0])
    x, info = solve_linear(K, b, 1e-10)
    assert info.method == "cg-amg" and info.residual <= 1e-10
    T = sp.diags([-np.ones(9), 2 * np.ones(10), -np.ones(9)], [-1, 0, 1]).tocsr()
    y, info = banded_solve(T, np.ones(10))
    assert np.allclose(T @ y, 1.0, atol=1e-13)
