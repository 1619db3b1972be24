import numpy as np
import pytest

from cglm.coefficients import constant_coefficient, constant_source
from cglm.fem import solve_problem
from cglm.global_local import PatchSpec, patch_mesh, solve_global_local
from cglm.mesh import Domain, RegionSpec, build_uniform_mesh

UNIT = Domain.unit(2)
REGION = RegionSpec((0.5, 0.5), 0.05, 0.05)


def test_constant_coefficient_reproduces_global_solution():
    g = lambda x: 1 + x[:, 0] - 2 * x[:, 1]
    mesh = build_uniform_mesh(UNIT, 40)
    c = constant_coefficient(1.0)
    u0 = solve_problem("homogenized", mesh, c, constant_source(0.0), dirichlet_values=g(mesh.vertices))
    patch = PatchSpec(REGION, 0.05)
    pm = patch_mesh(patch, 1 / 80)
    w = solve_global_local(u0, patch, pm, c, constant_source(0.0))
    assert w.kind == "local-fine"
    assert np.abs(w.values - g(pm.vertices)).max() <= 1e-10


def test_boundary_trace_is_exact():
    mesh = build_uniform_mesh(UNIT, 20)
    c = constant_coefficient(1.0)
    u0 = solve_problem("homogenized", mesh, c, constant_source(1.0))
    patch = PatchSpec(REGION, 0.1)
    pm = patch_mesh(patch, 1 / 40)
    w = solve_global_local(u0, patch, pm, constant_coefficient(3.0), constant_source(1.0))
    b = pm.boundary
    assert np.abs(w.values[b] - u0(pm.vertices[b])).max() == 0.0


def test_eta_zero_is_k0():
    lo, hi = PatchSpec(REGION, 0.0).box()
    assert np.allclose(lo, 0.45) and np.allclose(hi, 0.55)


def test_patch_validation():
    with pytest.raises(ValueError):
        PatchSpec(REGION, -0.1)
    with pytest.raises(ValueError, match="exceeds"):
        PatchSpec(REGION, 0.5).check_in(UNIT)
    with pytest.raises(ValueError, match="multiple"):
        patch_mesh(PatchSpec(REGION, 0.05), 0.03)
