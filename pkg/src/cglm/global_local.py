"""Sequential global-local recovery: a homogenized global solve followed by a fine
solve on an enlarged patch around K0 with Dirichlet data from the global solution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FemSolution, solve_problem
from .mesh import Domain, Mesh, RegionSpec, build_uniform_mesh, in_box


@dataclass(frozen=True)
class PatchSpec:
    region: RegionSpec  # K0 = center +- L
    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("patch enlargement eta must be non-negative")

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.region.center)
        r = self.region.half_width + self.eta
        return c - r, c + r

    def check_in(self, domain: Domain) -> None:
        lo, hi = self.box()
        if np.any(lo < np.array(domain.lower) - 1e-12) or np.any(hi > np.array(domain.upper) + 1e-12):
            raise ValueError(f"patch {lo.tolist()}..{hi.tolist()} exceeds the domain")


def patch_mesh(patch: PatchSpec, h: float) -> Mesh:
    """Uniform mesh of the patch with spacing h (the side must be a multiple of h)."""
    lo, hi = patch.box()
    side = float(hi[0] - lo[0])
    n = round(side / h)
    if n < 1 or abs(n * h - side) > 1e-9:
        raise ValueError(f"patch side {side} is not a multiple of h={h}")
    return build_uniform_mesh(Domain(tuple(lo), tuple(hi)), n)


def solve_global_local(u0: FemSolution, patch: PatchSpec, mesh: Mesh, a_eps, f,
                       tol: float = 1e-10, domain: Domain | None = None) -> FemSolution:
    """Fine solve on the patch with the nodal trace of u0 imposed on its boundary."""
    domain = domain or Domain(tuple(u0.mesh.vertices.min(axis=0)), tuple(u0.mesh.vertices.max(axis=0)))
    patch.check_in(domain)
    lo, hi = patch.box()
    if not np.all(in_box(mesh.vertices, lo, hi, tol=1e-9)):
        raise ValueError("patch mesh does not lie in the patch")
    g = np.zeros(mesh.n_vertices)
    bnd = np.flatnonzero(mesh.boundary)
    g[bnd] = u0(mesh.vertices[bnd])
    sol = solve_problem("local-fine", mesh, a_eps, f, tol, dirichlet_values=g)
    return FemSolution(sol.space, sol.values, "local-fine", sol.info, {"eta": patch.eta})
