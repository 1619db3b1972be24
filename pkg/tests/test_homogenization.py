import math

import numpy as np
import pytest

from cglm.coefficients import constant_coefficient, example1_coefficient, example1_effective, example2_exterior
from cglm.homogenization import (
    effective_from_corrector,
    EffectiveTensor, analytic_tensor, cell_effective_matrix, constant_tensor, e_hmm, harmonic_mean_1d,
    hmm_effective_field, hybrid_effective_1d, solve_cell_problem,
)
from cglm.mesh import Domain, RegionSpec

REGION = RegionSpec((0.5, 0.5), 0.05, 0.05)


def test_sqrt3():
    assert harmonic_mean_1d(lambda y: 2 + np.sin(2 * np.pi * y)) == pytest.approx(math.sqrt(3), abs=1e-10)


def test_constant_cell():
    B = cell_effective_matrix(lambda y: 2.5 * np.broadcast_to(np.eye(2), (len(y), 2, 2)).copy(), 16)
    assert np.allclose(B, 2.5 * np.eye(2), atol=1e-12)


def test_laminate_cell():
    lam = lambda y: (1.5 + np.sin(2 * np.pi * y[:, 0]))[:, None, None] * np.eye(2)
    B = cell_effective_matrix(lam, 128)
    y = np.arange(4096) / 4096
    harm = 1 / np.mean(1 / (1.5 + np.sin(2 * np.pi * y)))
    assert B[0, 0] == pytest.approx(harm, abs=1e-3)
    assert B[1, 1] == pytest.approx(1.5, abs=1e-3)
    assert abs(B[0, 1]) <= 1e-8


def test_appendix_as_1d_cell():
    B = cell_effective_matrix(lambda y: (2 + np.sin(2 * np.pi * y[:, 0]))[:, None, None], 4096, dim=1)
    assert B[0, 0] == pytest.approx(math.sqrt(3), abs=1e-6)


def test_corrector_zero_mean():
    sol = solve_cell_problem(example1_coefficient(eps=0.04).cell([0.2, 0.4]), 32)
    assert max(abs(sol.mean(0)), abs(sol.mean(1))) <= 1e-8


def test_example1_cell_matches_analytic():
    a = example1_coefficient(eps=0.01)
    x0 = np.array([0.3, 0.6])
    B = cell_effective_matrix(a.cell(x0), 128)
    A = example1_effective()(x0[None, :])[0]
    assert np.linalg.norm(B - A) / np.linalg.norm(A) <= 0.01


def test_periodic_field_gives_constant_table():
    c = constant_coefficient([[2.0, 0.2], [0.2, 1.0]])
    T = hmm_effective_field(c, 3, 8)
    assert np.allclose(T.table["values"], np.array([[2.0, 0.2], [0.2, 1.0]]), atol=1e-10)
    assert "hmm" in T.provenance


def test_example1_hmm_table_close_to_analytic():
    a = example1_coefficient(eps=0.01)
    T = hmm_effective_field(a, 16, 64, workers=4)
    A = analytic_tensor(example1_effective())
    e = e_hmm(A, T, exclude=REGION)
    g = np.linspace(0, 1, 41)
    pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    scale = np.sqrt((A(pts) ** 2).sum(axis=(1, 2))).max()  # sup of the Frobenius norm
    assert e < 0.05 * scale


def test_e_hmm_trivial_cases():
    A = analytic_tensor(example1_effective())
    shifted = EffectiveTensor(lambda x: A(x) + 0.01 * np.eye(2), 2)
    assert e_hmm(A, A) == 0.0
    assert e_hmm(A, shifted) == pytest.approx(0.01 * math.sqrt(2))


def test_table_csv_roundtrip():
    T = hmm_effective_field(example2_exterior(0.05), 3, 8)
    back = EffectiveTensor.from_csv(T.to_csv())
    x = np.array([[0.2, 0.7], [0.9, 0.1]])
    assert np.allclose(back(x), T(x))
    assert T.to_csv().splitlines()[0] == "x,y,A11,A12,A21,A22"


def test_hybrid_effective_1d_bound_and_exactness():
    A = math.sqrt(3)
    a = lambda y: 2 + np.sin(2 * np.pi * y)
    for rho in np.linspace(0, 1, 11):
        B = hybrid_effective_1d(a, A, rho)
        assert abs(A - B) <= 2 * 3 * (3 + math.sqrt(3)) * rho * (1 - rho) + 1e-12
    assert hybrid_effective_1d(a, A, 0.0) == pytest.approx(A, abs=1e-10)
    assert hybrid_effective_1d(a, A, 1.0) == pytest.approx(A, abs=1e-10)
    with pytest.raises(ValueError):
        hybrid_effective_1d(a, A, 1.5)


def test_voigt_reuss_bounds_example1():
    cell = example1_coefficient(eps=0.04).cell([0.3, 0.7])
    sol = solve_cell_problem(cell, 64)
    ev = np.linalg.eigvalsh(effective_from_corrector(sol))
    vals = cell(sol.mesh.centroids)[:, 0, 0]
    w = sol.mesh.measures
    assert 1 / np.sum(w / vals) - 1e-3 <= ev.min() and ev.max() <= np.sum(w * vals) + 1e-3


def test_constant_tensor_shape():
    T = constant_tensor(2.0, dim=2)
    assert np.allclose(T(np.zeros((3, 2))), 2 * np.eye(2))
