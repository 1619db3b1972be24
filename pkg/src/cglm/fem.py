"""P1 Lagrange finite elements: assembly and solution of the fine, homogenized and
hybrid problems, plus the closed-form 1D discrete solution with a unit end flux."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .linalg import SolveInfo, is_symmetric, solve_linear
from .mesh import Mesh
from .quadrature import reference_rule

DEFAULT_ORDER = 4
PROBLEM_KINDS = ("fine", "homogenized", "hybrid", "cell", "local-fine")


@dataclass(frozen=True, eq=False)
class FemSpace:
    mesh: Mesh
    dirichlet: np.ndarray  # (nv,) bool
    degree: int = 1

    @cached_property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    @cached_property
    def constrained(self) -> np.ndarray:
        return np.flatnonzero(self.dirichlet)


def make_space(mesh: Mesh, dirichlet=None) -> FemSpace:
    """P1 space with homogeneous Dirichlet data on `dirichlet` (default: all boundary vertices)."""
    mask = mesh.boundary if dirichlet is None else np.asarray(dirichlet, dtype=bool)
    return FemSpace(mesh, np.array(mask, copy=True))


def quadrature_points(mesh: Mesh, order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points (nc, nq, dim) and reference weights (nq,) summing to 1."""
    ref, w = reference_rule(mesh.dim, order)
    v0 = mesh.vertices[mesh.cells[:, 0]]
    pts = v0[:, None, :] + np.einsum("cij,qj->cqi", mesh.jacobians, ref)
    return pts, w


def cell_average(mesh: Mesh, coefficient, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Quadrature mean of a matrix-valued coefficient over each cell, (nc, d, d)."""
    pts, w = quadrature_points(mesh, order)
    nc, nq, d = pts.shape
    vals = np.asarray(coefficient(pts.reshape(-1, d))).reshape(nc, nq, d, d)
    return np.einsum("q,cqij->cij", w, vals)


def stiffness_from_averages(mesh: Mesh, abar: np.ndarray) -> sp.csr_matrix:
    G = mesh.gradients  # (nc, k, d)
    # K_e[i, j] = |tau| grad phi_i . abar grad phi_j
    Ke = np.einsum("c,cid,cde,cje->cij", mesh.measures, G, abar, G)
    k = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(space, coefficient, order: int = DEFAULT_ORDER) -> sp.csr_matrix:
    """Full (unconstrained) stiffness matrix of <a grad u, grad w>."""
    mesh = space.mesh if isinstance(space, FemSpace) else space
    return stiffness_from_averages(mesh, cell_average(mesh, coefficient, order))


def assemble_load(space, f, order: int = DEFAULT_ORDER) -> np.ndarray:
    mesh = space.mesh if isinstance(space, FemSpace) else space
    ref, w = reference_rule(mesh.dim, order)
    pts, _ = quadrature_points(mesh, order)
    nc, nq, d = pts.shape
    fv = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(nc, nq)
    phi = np.column_stack([1 - ref.sum(axis=1), ref])  # (nq, k)
    Fe = mesh.measures[:, None] * np.einsum("q,cq,qk->ck", w, fv, phi)
    return np.bincount(mesh.cells.ravel(), weights=Fe.ravel(), minlength=mesh.n_vertices)


@dataclass
class SparseSystem:
    """Free-node system with the Dirichlet lift already moved to the right-hand side."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    symmetric: bool
    space: FemSpace
    lift: np.ndarray  # full nodal vector carrying the Dirichlet values

    def expand(self, free_values: np.ndarray) -> np.ndarray:
        u = self.lift.copy()
        u[self.space.free] = free_values
        return u

    def to_triplets(self) -> str:
        A = self.matrix.tocoo()
        return "\n".join(f"{i} {j} {v!r}" for i, j, v in zip(A.row, A.col, A.data)) + "\n"


def reduce_system(space: FemSpace, K: sp.csr_matrix, F: np.ndarray, dirichlet_values=None) -> SparseSystem:
    lift = np.zeros(space.mesh.n_vertices)
    if dirichlet_values is not None:
        lift[space.constrained] = np.asarray(dirichlet_values, dtype=float)[space.constrained] \
            if np.size(dirichlet_values) == space.mesh.n_vertices else dirichlet_values
    fr, co = space.free, space.constrained
    Aff = K[fr][:, fr].tocsr()
    Aff.eliminate_zeros()
    rhs = F[fr] - K[fr][:, co] @ lift[co]
    return SparseSystem(Aff, rhs, is_symmetric(Aff), space, lift)


def solve(system: SparseSystem, tol: float = 1e-10, max_iter: int | None = None, method: str = "auto"):
    x, info = solve_linear(system.matrix, system.rhs, tol, max_iter, method, system.symmetric)
    return x, info


@dataclass(frozen=True, eq=False)
class FemSolution:
    space: FemSpace
    values: np.ndarray
    kind: str
    info: SolveInfo | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    @cached_property
    def cell_gradients(self) -> np.ndarray:
        return np.einsum("ck,ckd->cd", self.values[self.mesh.cells], self.mesh.gradients)

    def evaluate(self, points, located=None) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients at arbitrary points of the closed domain."""
        pts = np.atleast_2d(points)
        idx, lam = located if located is not None else self.mesh.locate(pts)
        vals = np.einsum("nk,nk->n", lam, self.values[self.mesh.cells[idx]])
        return vals, self.cell_gradients[idx]

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)[0]

    def to_text(self) -> str:
        return "".join(f"{i} {v!r}\n" for i, v in enumerate(self.values))


def solve_problem(kind: str, mesh: Mesh, coefficient, f, tol: float = 1e-10, *,
                  dirichlet=None, dirichlet_values=None, neumann=None,
                  order: int = DEFAULT_ORDER, max_iter: int | None = None,
                  method: str = "auto") -> FemSolution:
    """Assemble and solve <coef grad u, grad w> = <f, w> (+ point Neumann loads).

    `neumann` maps vertex index -> boundary flux added to the load vector.
    """
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    space = make_space(mesh, dirichlet)
    K = assemble_stiffness(space, coefficient, order)
    F = assemble_load(space, f, order) if f is not None else np.zeros(mesh.n_vertices)
    for node, g in (neumann or {}).items():
        F[node] += g
    system = reduce_system(space, K, F, dirichlet_values)
    x, info = solve(system, tol, max_iter, method)
    return FemSolution(space, system.expand(x), kind, info)


def galerkin_residual(solution: FemSolution, coefficient, f, order: int = DEFAULT_ORDER) -> np.ndarray:
    """<coef grad v_h, grad phi_i> - <f, phi_i> for every free basis function."""
    K = assemble_stiffness(solution.space, coefficient, order)
    F = assemble_load(solution.space, f, order)
    return (K @ solution.values - F)[solution.space.free]


def energy(solution: FemSolution, coefficient, order: int = DEFAULT_ORDER) -> float:
    K = assemble_stiffness(solution.space, coefficient, order)
    return float(solution.values @ (K @ solution.values))


def solve_1d_exact(b_means, h: float, flux: float = 1.0) -> np.ndarray:
    """Nodal values v_0..v_n of the 1D P1 solution with v_0 = 0 and end flux `flux`.

    The discrete flux (v_j - v_{j-1}) b_j / h is constant and equal to `flux`,
    so v_j = flux * h * sum_{i<=j} 1/b_i.
    """
    b = np.asarray(b_means, dtype=float)
    if np.any(b <= 0):
        raise ValueError("cell coefficients must be positive")
    return np.concatenate([[0.0], flux * h * np.cumsum(1.0 / b)])


def piecewise_constant_1d(mesh: Mesh, cell_values):
    """Coefficient evaluator returning the per-cell constant on a 1D mesh."""
    vals = np.asarray(cell_values, dtype=float)
    x = mesh.vertices[:, 0]
    left = np.minimum(x[mesh.cells[:, 0]], x[mesh.cells[:, 1]])
    order = np.argsort(left)
    edges = left[order]

    def coef(pts):
        k = np.clip(np.searchsorted(edges, pts[:, 0], side="right") - 1, 0, len(edges) - 1)
        return vals[order[k]][:, None, None] * np.ones((1, 1, 1))

    return coef
