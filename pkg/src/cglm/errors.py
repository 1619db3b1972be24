"""Subdomain error norms between P1 solutions on different meshes, the eta(K)
factor and convergence-order tables."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fem import FemSolution, quadrature_points
from .mesh import Mesh, RegionSpec, in_box
from .quadrature import reference_rule

ERROR_ORDER = 4


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, or its complement in the domain when `complement` is set."""

    lo: tuple
    hi: tuple
    complement: bool = False

    def select(self, points: np.ndarray) -> np.ndarray:
        inside = in_box(points, self.lo, self.hi, tol=0.0)
        return ~inside if self.complement else inside

    @classmethod
    def k0(cls, region: RegionSpec) -> "Box":
        lo, hi = region.k0_box()
        return cls(tuple(lo), tuple(hi))

    @classmethod
    def outside_k(cls, region: RegionSpec) -> "Box":
        lo, hi = region.k_box()
        return cls(tuple(lo), tuple(hi), complement=True)

    @classmethod
    def whole(cls, mesh: Mesh) -> "Box":
        return cls(tuple(mesh.vertices.min(axis=0)), tuple(mesh.vertices.max(axis=0)))


@dataclass
class NormValues:
    l2: float
    h1_semi: float
    measure: float  # measure of the snapped integration region
    n_cells: int

    @property
    def h1(self) -> float:
        return math.hypot(self.l2, self.h1_semi)

    def get(self, norm: str) -> float:
        return {"l2": self.l2, "h1": self.h1, "h1semi": self.h1_semi}[norm]


def _values_at(sol, mesh: Mesh, cells: np.ndarray, pts: np.ndarray, ref_lambda: np.ndarray):
    """Values (nc, nq) and gradients (nc, nq, d) of `sol` at the quadrature points."""
    nc, nq, d = pts.shape
    if sol.mesh is mesh:
        u = sol.values[mesh.cells[cells]]
        vals = np.einsum("qk,ck->cq", ref_lambda, u)
        grads = np.broadcast_to(sol.cell_gradients[cells][:, None, :], (nc, nq, d))
        return vals, grads
    v, g = sol.evaluate(pts.reshape(-1, d))
    return v.reshape(nc, nq), g.reshape(nc, nq, d)


def difference_norms(u: FemSolution, v: FemSolution, mesh: Mesh, region: Box | None = None,
                     order: int = ERROR_ORDER) -> NormValues:
    """L2 and H1-seminorm of u - v integrated on the cells of `mesh` whose centroid lies in `region`."""
    cells = np.arange(mesh.n_cells)
    if region is not None:
        cells = cells[region.select(mesh.centroids)]
    ref, w = reference_rule(mesh.dim, order)
    lam = np.column_stack([1 - ref.sum(axis=1), ref])
    pts_all, _ = quadrature_points(mesh, order)
    pts = pts_all[cells]
    uv, ug = _values_at(u, mesh, cells, pts, lam)
    vv, vg = _values_at(v, mesh, cells, pts, lam)
    meas = mesh.measures[cells]
    l2 = np.sum(meas * ((uv - vv) ** 2 @ w))
    semi = np.sum(meas * (((ug - vg) ** 2).sum(axis=2) @ w))
    return NormValues(float(np.sqrt(l2)), float(np.sqrt(semi)), float(meas.sum()), len(cells))


def cross_mesh_error(reference: FemSolution, candidate: FemSolution, region: Box | None = None,
                     norm: str = "h1", order: int = ERROR_ORDER) -> float:
    """Norm of reference - candidate over `region`, integrated on the reference mesh."""
    if norm not in ("l2", "h1", "h1semi"):
        raise ValueError(f"unknown norm {norm!r}")
    vals = difference_norms(reference, candidate, reference.mesh, region, order)
    if vals.n_cells == 0:
        raise ValueError("region contains no reference cells")
    return vals.get(norm)


def eta_factor(K_measure: float, n: int, s: float = 1.0) -> float:
    """|ln|K||^(1/2) for n = 2, s = 1; 1 for n = 3 or s in (0, 1)."""
    if not 0 < K_measure < 1:
        raise ValueError(f"|K| must lie in (0, 1), got {K_measure}")
    if n == 3 or 0 < s < 1:
        return 1.0
    if n == 2 and s == 1:
        return math.sqrt(abs(math.log(K_measure)))
    raise ValueError(f"eta(K) is not defined for n={n}, s={s}")


@dataclass
class ErrorReport:
    rows: list[dict]
    e_hmm: float | None = None
    eta: float | None = None
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("h,l2_err,l2_order,h1_err,h1_order\n")
        fmt = lambda v: "" if v is None else f"{v:.6e}"
        for r in self.rows:
            out.write(f"{r['h']!r},{fmt(r['l2'])},{fmt(r.get('l2_order'))},{fmt(r['h1'])},{fmt(r.get('h1_order'))}\n")
        return out.getvalue()

    def orders(self, key: str) -> list[float]:
        return [r[f"{key}_order"] for r in self.rows[1:] if r.get(f"{key}_order") is not None]


def convergence_table(rows, **meta) -> ErrorReport:
    """Rows of (h, l2, h1); orders log2(e_prev / e) where h halves between rows."""
    out = []
    prev = None
    for h, l2, h1 in rows:
        if min(l2, h1) < 0:
            raise ValueError("errors must be non-negative")
        r = {"h": float(h), "l2": float(l2), "h1": float(h1), "l2_order": None, "h1_order": None}
        if prev is not None and math.isclose(prev["h"] / h, 2.0, rel_tol=1e-9):
            if l2 > 0 and prev["l2"] > 0:
                r["l2_order"] = math.log2(prev["l2"] / l2)
            if h1 > 0 and prev["h1"] > 0:
                r["h1_order"] = math.log2(prev["h1"] / h1)
        out.append(r)
        prev = r
    return ErrorReport(out, meta=meta)
