"""Effective coefficients: 1D harmonic means, periodic cell problems and
HMM-style tables of the effective matrix sampled on a macroscopic grid."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .coefficients import CoefficientField, sample_points
from .fem import cell_average
from .linalg import SolveInfo, solve_linear
from .mesh import Domain, Mesh, RegionSpec, build_uniform_mesh, in_box

CELL_ORDER = 4


# --- effective tensors ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EffectiveTensor:
    evaluator: Callable[[np.ndarray], np.ndarray]
    dim: int
    provenance: str = "exact"
    table: dict | None = None  # {"axes": [...], "values": array(..., d, d)}

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.dim)
        return self.evaluator(x)

    def to_csv(self) -> str:
        """Table rows "x y A11 A12 A21 A22" (2D) or "x A11" (1D)."""
        if self.table is None:
            raise ValueError("only tabulated tensors can be serialised")
        axes, vals = self.table["axes"], self.table["values"]
        out = io.StringIO()
        if self.dim == 1:
            out.write("x,A11\n")
            for x, v in zip(axes[0], vals):
                out.write(f"{float(x)!r},{float(v[0, 0])!r}\n")
        else:
            out.write("x,y,A11,A12,A21,A22\n")
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    row = [x, y, *vals[i, j].ravel()]
                    out.write(",".join(repr(float(r)) for r in row) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, provenance: str = "table") -> "EffectiveTensor":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] == 2:
            return tabulated_tensor([data[:, 0]], data[:, 1].reshape(-1, 1, 1), provenance)
        xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
        vals = data[:, 2:].reshape(len(xs), len(ys), 2, 2)
        return tabulated_tensor([xs, ys], vals, provenance)


def analytic_tensor(fn, dim: int = 2, provenance: str = "exact") -> EffectiveTensor:
    return EffectiveTensor(fn, dim, provenance)


def constant_tensor(matrix, dim: int | None = None, provenance: str = "constant") -> EffectiveTensor:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.size == 1 and dim:
        m = m[0, 0] * np.eye(dim)
    d = m.shape[0]
    return EffectiveTensor(lambda x: np.broadcast_to(m, (len(x), d, d)).copy(), d, provenance)


def tabulated_tensor(axes, values, provenance: str) -> EffectiveTensor:
    """Componentwise (bi)linear interpolation between tabulated samples."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=float)
    d = values.shape[-1]
    interp = RegularGridInterpolator(tuple(axes), values, method="linear", bounds_error=False, fill_value=None)

    def ev(x):
        return interp(x).reshape(len(x), d, d)

    return EffectiveTensor(ev, len(axes), provenance, {"axes": axes, "values": values})


def composite_tensor(inside: Callable, outside: EffectiveTensor, region: RegionSpec,
                     provenance: str | None = None) -> EffectiveTensor:
    """`inside` on K0, `outside` elsewhere."""
    lo, hi = region.k0_box()

    def ev(x):
        out = outside(x)
        m = in_box(x, lo, hi, tol=0.0)
        if m.any():
            out[m] = inside(x[m])
        return out

    return EffectiveTensor(ev, outside.dim, provenance or f"composite({outside.provenance})")


# --- 1D closed forms --------------------------------------------------------


def _fast_profile(a, x) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(a, CoefficientField):
        x0 = np.zeros(a.dim) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
        frozen = a.cell(x0)
        return lambda y: frozen(np.column_stack([y] + [np.zeros_like(y)] * (a.dim - 1)))[:, 0, 0]
    return lambda y: np.asarray(a(y), dtype=float)


def harmonic_mean_1d(a, x=None, points: int = 1024) -> float:
    """(int_0^1 1/a(x, y) dy)^-1 by the periodic trapezoidal rule.

    `a` is a scalar CoefficientField (the first fast coordinate is integrated)
    or a callable of y on [0, 1).
    """
    prof = _fast_profile(a, x)
    y = np.arange(points) / points
    v = prof(y)
    if np.any(v <= 0):
        raise ValueError("coefficient samples must be positive")
    return float(1.0 / np.mean(1.0 / v))


def hybrid_effective_1d(a, A: float, rho: float, x=None, points: int = 1024) -> float:
    """1D H-limit of rho * a + (1 - rho) * A at frozen rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    prof = _fast_profile(a, x)
    return harmonic_mean_1d(lambda y: rho * prof(y) + (1 - rho) * A, points=points)


# --- periodic cell problems -------------------------------------------------


@lru_cache(maxsize=8)
def periodic_cell_mesh(dim: int, n: int) -> tuple[Mesh, np.ndarray]:
    """Uniform mesh of Y = (-1/2, 1/2)^dim and the vertex -> periodic dof map."""
    mesh = build_uniform_mesh(Domain((-0.5,) * dim, (0.5,) * dim), n)
    idx = np.rint((mesh.vertices + 0.5) * n).astype(np.int64) % n
    dof = idx[:, 0] if dim == 1 else idx[:, 0] * n + idx[:, 1]
    dof.setflags(write=False)
    return mesh, dof


@dataclass(frozen=True, eq=False)
class CellProblemSolution:
    correctors: np.ndarray  # (dim, n_dofs) periodic nodal values
    mesh: Mesh
    dofmap: np.ndarray
    abar: np.ndarray  # per-cell quadrature mean of the coefficient
    info: list[SolveInfo] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def nodal(self, j: int) -> np.ndarray:
        return self.correctors[j][self.dofmap]

    def mean(self, j: int) -> float:
        v = self.nodal(j)[self.mesh.cells].mean(axis=1)
        return float(np.sum(self.mesh.measures * v))

    def corrector_gradients(self) -> np.ndarray:
        """(dim, nc, dim): gradient of each corrector per cell."""
        return np.stack([
            np.einsum("ck,ckd->cd", self.nodal(j)[self.mesh.cells], self.mesh.gradients)
            for j in range(self.dim)
        ])


def solve_cell_problem(b, resolution: int, dim: int = 2, order: int = CELL_ORDER,
                       tol: float = 1e-10, max_iter: int | None = None) -> CellProblemSolution:
    """Periodic correctors for the frozen coefficient b(y) on Y = (-1/2, 1/2)^dim.

    Solves <b grad chi_j, grad w> = -<b e_j, grad w> with one pinned degree of
    freedom, then shifts each corrector to zero mean.
    """
    mesh, dof = periodic_cell_mesh(dim, resolution)
    abar = cell_average(mesh, b, order)
    G = mesh.gradients
    Ke = np.einsum("c,cid,cde,cje->cij", mesh.measures, G, abar, G)
    cells = dof[mesh.cells]
    k = dim + 1
    ndof = resolution**dim
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    Kp = K[1:, 1:]
    chis = np.zeros((dim, ndof))
    infos = []
    for j in range(dim):
        Fe = -mesh.measures[:, None] * np.einsum("cid,cd->ci", G, abar[:, :, j])
        F = np.bincount(cells.ravel(), weights=Fe.ravel(), minlength=ndof)
        x, info = solve_linear(Kp, F[1:], tol, max_iter)
        chis[j, 1:] = x
        infos.append(info)
    sol = CellProblemSolution(chis, mesh, dof, abar, infos)
    for j in range(dim):
        chis[j] -= sol.mean(j)  # cell measures sum to |Y| = 1
    return sol


def effective_from_corrector(solution: CellProblemSolution, b=None, order: int = CELL_ORDER) -> np.ndarray:
    """B_ij = mean over Y of b_ij + b_ik d chi_j / d y_k."""
    mesh = solution.mesh
    abar = solution.abar if b is None else cell_average(mesh, b, order)
    grads = solution.corrector_gradients()  # (j, c, k)
    d = solution.dim
    flux = abar[None, :, :, :] @ (np.eye(d)[:, None, :, None] + grads[..., None])  # (j, c, i, 1)
    B = np.einsum("c,jci->ij", mesh.measures, flux[..., 0])
    return B


def cell_effective_matrix(b, resolution: int, dim: int = 2, **kw) -> np.ndarray:
    return effective_from_corrector(solve_cell_problem(b, resolution, dim, **kw))


def hmm_effective_field(a: CoefficientField, samples: int, resolution: int,
                        domain: Domain | None = None, workers: int = 1,
                        tol: float = 1e-10) -> EffectiveTensor:
    """Effective matrix from cell solves at a samples^dim grid, interpolated (bi)linearly."""
    domain = domain or Domain.unit(a.dim)
    axes = [np.linspace(lo, hi, samples) for lo, hi in zip(domain.lower, domain.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, a.dim)

    def one(x0):
        return cell_effective_matrix(a.cell(x0), resolution, a.dim, tol=tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            mats = list(ex.map(one, grid))
    else:
        mats = [one(x0) for x0 in grid]
    vals = np.array(mats).reshape(*([samples] * a.dim), a.dim, a.dim)
    prov = f"hmm(cell={resolution}, samples={samples})"
    return tabulated_tensor(axes, vals, prov)


def e_hmm(A_exact, A_h, domain: Domain | None = None, exclude: RegionSpec | None = None,
          samples: int = 4096, seed: int = 1) -> float:
    """Max Frobenius discrepancy over deterministic sample points of D minus K."""
    dim = getattr(A_h, "dim", 2)
    domain = domain or Domain.unit(dim)
    pts = sample_points(domain, samples, seed)
    if exclude is not None:
        lo, hi = exclude.k_box()
        pts = pts[~in_box(pts, lo, hi, tol=0.0)]
    diff = np.asarray(A_exact(pts)) - np.asarray(A_h(pts))
    return float(np.sqrt((diff**2).sum(axis=(1, 2))).max())
