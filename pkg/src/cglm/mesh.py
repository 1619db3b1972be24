"""Simplicial meshes of axis-aligned boxes.

Uniform and body-fitted (quadtree-graded) triangulations in 2D, uniform
partitions in 1D. Both generators share one canonical ordering so that a
body-fitted mesh without refinement is identical to the uniform one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# region tags stored per cell on body-fitted meshes
TAG_INSIDE_K0 = 0
TAG_TRANSITION = 1
TAG_EXTERIOR = 2


@dataclass(frozen=True)
class Domain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValueError("domain must be 1D or 2D with matching corners")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"upper corner {hi} must exceed lower corner {lo}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def measure(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)

    @classmethod
    def unit(cls, dim: int = 2) -> "Domain":
        return cls((0.0,) * dim, (1.0,) * dim)


@dataclass(frozen=True)
class RegionSpec:
    """Defect region K0 = center + (-L, L)^n with collar delta, K = center + (-L-delta, L+delta)^n."""

    center: tuple[float, ...]
    half_width: float
    collar: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.half_width <= 0:
            raise ValueError("half-width L must be positive")
        if self.collar < 0:
            raise ValueError("collar delta must be non-negative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def k0_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.center)
        return c - self.half_width, c + self.half_width

    def k_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.center)
        r = self.half_width + self.collar
        return c - r, c + r

    @property
    def k_measure(self) -> float:
        return (2 * (self.half_width + self.collar)) ** self.dim

    def separation(self, domain: Domain) -> float:
        """dist(K0, dK minus dD) measured in the max-norm."""
        lo, hi = self.k_box()
        dlo, dhi = np.array(domain.lower), np.array(domain.upper)
        gaps = []
        for a in range(self.dim):
            if lo[a] > dlo[a] + 1e-14:
                gaps.append(self.collar)
            if hi[a] < dhi[a] - 1e-14:
                gaps.append(self.collar)
        return min(gaps) if gaps else math.inf

    def validate_in(self, domain: Domain) -> None:
        lo, hi = self.k_box()
        if np.any(lo < np.array(domain.lower) - 1e-12) or np.any(hi > np.array(domain.upper) + 1e-12):
            raise ValueError(f"region K={lo.tolist()}..{hi.tolist()} is not contained in the domain")


def in_box(points, lo, hi, tol: float = 1e-12) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.all((pts >= np.asarray(lo) - tol) & (pts <= np.asarray(hi) + tol), axis=1)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, dim)
    cells: np.ndarray  # (nc, dim + 1), counter-clockwise in 2D
    boundary: np.ndarray  # (nv,) bool
    tags: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("vertices", "cells", "boundary", "tags"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @cached_property
    def jacobians(self) -> np.ndarray:
        v = self.vertices[self.cells]
        return np.swapaxes(v[:, 1:, :] - v[:, :1, :], 1, 2)  # columns are edge vectors

    @cached_property
    def measures(self) -> np.ndarray:
        det = np.linalg.det(self.jacobians) if self.dim > 1 else self.jacobians[:, 0, 0]
        return np.abs(det) / math.factorial(self.dim)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the P1 hat functions per cell, shape (nc, dim + 1, dim)."""
        inv = np.linalg.inv(self.jacobians)  # rows: grad of barycentric coords 1..dim
        g = np.empty((self.n_cells, self.dim + 1, self.dim))
        g[:, 1:, :] = inv
        g[:, 0, :] = -inv.sum(axis=1)
        return g

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.vertices[self.cells]
        k = self.dim + 1
        d = np.zeros(self.n_cells)
        for i in range(k):
            for j in range(i + 1, k):
                d = np.maximum(d, np.linalg.norm(v[:, i] - v[:, j], axis=1))
        return d

    @cached_property
    def inradii(self) -> np.ndarray:
        if self.dim == 1:
            return self.measures / 2
        v = self.vertices[self.cells]
        perim = sum(np.linalg.norm(v[:, i] - v[:, (i + 1) % 3], axis=1) for i in range(3))
        return 2 * self.measures / perim

    @cached_property
    def shape_ratios(self) -> np.ndarray:
        """Inscribed radius over diameter per cell."""
        return self.inradii / self.diameters

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges (sorted vertex pairs) and the number of cells sharing each."""
        if self.dim == 1:
            e = np.sort(self.cells, axis=1)
            return e, np.ones(len(e), dtype=int)
        e = np.concatenate([self.cells[:, [0, 1]], self.cells[:, [1, 2]], self.cells[:, [2, 0]]])
        e = np.sort(e, axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def to_text(self) -> str:
        lines = [str(self.n_vertices)]
        lines += [" ".join(repr(float(c)) for c in v) for v in self.vertices]
        lines.append(str(self.n_cells))
        tags = self.tags if self.tags is not None else [None] * self.n_cells
        for c, t in zip(self.cells, tags):
            s = " ".join(str(int(i)) for i in c)
            lines.append(s if t is None else f"{s} {int(t)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Mesh":
        rows = [r.split() for r in text.strip().splitlines()]
        nv = int(rows[0][0])
        verts = np.array([[float(x) for x in r] for r in rows[1 : nv + 1]])
        nc = int(rows[nv + 1][0])
        dim = verts.shape[1]
        cell_rows = rows[nv + 2 : nv + 2 + nc]
        cells = np.array([[int(x) for x in r[: dim + 1]] for r in cell_rows], dtype=np.int64)
        tags = None
        if cell_rows and len(cell_rows[0]) > dim + 1:
            tags = np.array([int(r[dim + 1]) for r in cell_rows])
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        boundary = np.any(np.isclose(verts, lo) | np.isclose(verts, hi), axis=1)
        return cls(verts, cells, boundary, tags)

    @cached_property
    def _trifinder(self):
        from matplotlib.tri import Triangulation

        tri = Triangulation(self.vertices[:, 0], self.vertices[:, 1], self.cells)
        return tri.get_trifinder()

    def barycentric(self, cell_idx: np.ndarray, points: np.ndarray) -> np.ndarray:
        v0 = self.vertices[self.cells[cell_idx, 0]]
        inv = np.linalg.inv(self.jacobians[cell_idx])
        lam = np.einsum("nij,nj->ni", inv, points - v0)
        return np.column_stack([1 - lam.sum(axis=1), lam])

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and barycentric coordinates for each point in the closed domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        if not np.all(in_box(pts, lo, hi)):
            raise ValueError("point outside the mesh domain")
        if self.dim == 1:
            x = self.vertices[:, 0]
            order = np.argsort(x)
            k = np.clip(np.searchsorted(x[order], pts[:, 0], side="right") - 1, 0, len(x) - 2)
            left = order[k]
            # map left vertex back to the cell starting there
            start = np.full(self.n_vertices, -1)
            cl = self.cells
            lo_vertex = np.where(x[cl[:, 0]] < x[cl[:, 1]], cl[:, 0], cl[:, 1])
            start[lo_vertex] = np.arange(self.n_cells)
            idx = start[left]
        else:
            idx = np.asarray(self._trifinder(pts[:, 0], pts[:, 1]), dtype=np.int64)
            missing = np.flatnonzero(idx < 0)
            for m in missing:  # points on the hull can slip through the trapezoid map
                idx[m] = self._locate_brute(pts[m])
        lam = self.barycentric(idx, pts)
        lam = np.where((lam < 0) & (lam > -1e-10), 0.0, lam)
        lam = np.where((lam > 1) & (lam < 1 + 1e-10), 1.0, lam)
        return idx, lam

    def _locate_brute(self, p: np.ndarray) -> int:
        lam = self.barycentric(np.arange(self.n_cells), np.broadcast_to(p, (self.n_cells, self.dim)))
        return int(np.argmax(lam.min(axis=1)))


def locate_cell(mesh: Mesh, point) -> tuple[int, np.ndarray]:
    idx, lam = mesh.locate(np.atleast_2d(point))
    return int(idx[0]), lam[0]


# --- construction ---------------------------------------------------------


def _finalize(int_verts: np.ndarray, tris: np.ndarray, unit: float, origin: np.ndarray,
              extent: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical ordering: vertices lexicographic by (x, y), cells by centroid."""
    order = np.lexsort((int_verts[:, 1], int_verts[:, 0]))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    iv = int_verts[order]
    tris = rank[tris]
    # counter-clockwise, smallest index first
    p = iv[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    shift = np.argmin(tris, axis=1)
    rows = np.arange(len(tris))[:, None]
    tris = tris[rows, (shift[:, None] + np.arange(3)) % 3]
    c = iv[tris].sum(axis=1)  # 3 * centroid in integer units
    corder = np.lexsort((c[:, 1], c[:, 0]))
    tris = tris[corder]
    verts = origin + iv * unit
    boundary = np.any((iv == 0) | (iv == extent), axis=1)
    return verts, tris, boundary


def _grid_count(length: float, h: float, what: str) -> int:
    n = round(length / h)
    if n < 1 or abs(n * h - length) > 1e-9 * max(1.0, length):
        raise ValueError(f"{what}={h} does not divide the domain side {length}")
    return int(n)


def build_uniform_mesh(domain: Domain, subdivisions) -> Mesh:
    """Uniform partition; in 2D every grid square is split along its rising diagonal."""
    n = np.broadcast_to(np.atleast_1d(subdivisions), (domain.dim,)).astype(int)
    if np.any(n < 1):
        raise ValueError("subdivisions must be at least 1")
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    if domain.dim == 1:
        x = np.linspace(lo[0], hi[0], n[0] + 1)
        cells = np.column_stack([np.arange(n[0]), np.arange(1, n[0] + 1)])
        boundary = np.zeros(n[0] + 1, dtype=bool)
        boundary[[0, -1]] = True
        return Mesh(x[:, None], cells, boundary, metadata={"kind": "uniform", "n": int(n[0])})
    nx, ny = int(n[0]), int(n[1])
    # integer grid with unit 1/2 so that square centres are representable (shared with quadtree path)
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    iv = np.column_stack([i.ravel(), j.ravel()]) * 2
    idx = lambda a, b: a * (ny + 1) + b
    a, b = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    a, b = a.ravel(), b.ravel()
    v00, v10, v11, v01 = idx(a, b), idx(a + 1, b), idx(a + 1, b + 1), idx(a, b + 1)
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    h = (hi - lo) / np.array([nx, ny])
    if not np.isclose(h[0], h[1]):
        unit = np.array([h[0], h[1]]) / 2
    else:
        unit = h[0] / 2
    verts, tris, boundary = _finalize(iv, tris, unit, lo, np.array([2 * nx, 2 * ny]))
    meta = {"kind": "uniform", "n": [nx, ny], "h": float(max(h))}
    return Mesh(verts, tris, boundary, metadata=meta)


def _box_dist(q0, q1, k0, k1) -> np.ndarray:
    """Max-norm distance between boxes [q0,q1] (vectorized) and [k0,k1]."""
    gap = np.maximum(np.maximum(k0 - q1, q0 - k1), 0)
    return gap.max(axis=-1)


def build_body_fitted_mesh(domain: Domain, region: RegionSpec, h_coarse: float, h_fine: float) -> Mesh:
    """Quadtree-graded triangulation fine inside K, coarse away from it.

    Squares are refined while their max-norm distance to K is smaller than
    their own side, which yields concentric layers whose size doubles away
    from K and adjacent leaves that differ by at most one level. Leaves with
    a hanging midpoint are fanned from their centre.
    """
    if domain.dim != 2:
        raise ValueError("body-fitted meshes are 2D only")
    if h_fine > h_coarse * (1 + 1e-12):
        raise ValueError("h_fine must not exceed h_coarse")
    ratio = h_coarse / h_fine
    levels = round(math.log2(ratio))
    if abs(2.0**levels - ratio) > 1e-9 * ratio:
        raise ValueError(f"h_coarse/h_fine={ratio} must be a power of two")
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    nx = _grid_count(hi[0] - lo[0], h_coarse, "h_coarse")
    ny = _grid_count(hi[1] - lo[1], h_coarse, "h_coarse")

    # snap the region to the fine grid
    L = round(region.half_width / h_fine) * h_fine
    delta = round(region.collar / h_fine) * h_fine
    if L <= 0:
        raise ValueError(f"half-width L={region.half_width} is below the fine mesh size {h_fine}")
    if region.collar > 0 and delta == 0:
        raise ValueError(
            f"collar delta={region.collar} cannot be resolved; need delta >= h_fine={h_fine}"
        )
    c_idx = np.round((np.array(region.center) - lo) / h_fine)
    center = lo + c_idx * h_fine
    snapped = RegionSpec(tuple(center), L, delta)
    snapped.validate_in(domain)

    fine = 2**levels  # fine units per coarse square
    mL, md = round(L / h_fine), round(delta / h_fine)
    k_lo = c_idx - mL - md
    k_hi = c_idx + mL + md
    k0_lo, k0_hi = c_idx - mL, c_idx + mL

    # quadtree refinement, level by level
    a, b = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    active = np.column_stack([a.ravel(), b.ravel()]) * fine  # lower-left in fine units
    size = fine
    leaves = []
    while True:
        if size == 1:
            leaves.append((active, size))
            break
        q0 = active.astype(float)
        d = _box_dist(q0, q0 + size, k_lo, k_hi)
        refine = d < size
        leaves.append((active[~refine], size))
        half = size // 2
        r = active[refine]
        if len(r) == 0:
            break
        offs = np.array([[0, 0], [half, 0], [0, half], [half, half]])
        active = (r[:, None, :] + offs[None]).reshape(-1, 2)
        size = half

    # vertices in half-fine units so leaf centres are integral
    corner_set = set()
    for sq, s in leaves:
        for dx, dy in ((0, 0), (s, 0), (0, s), (s, s)):
            for p in (sq + [dx, dy]) * 2:
                corner_set.add((int(p[0]), int(p[1])))
    vid = {}
    verts = []

    def vindex(p):
        k = vid.get(p)
        if k is None:
            k = vid[p] = len(verts)
            verts.append(p)
        return k

    for p in sorted(corner_set):
        vindex(p)
    tris = []
    for sq, s in leaves:
        s2 = 2 * s
        for x0, y0 in (sq * 2).tolist():
            ring = [(x0, y0), (x0 + s, y0), (x0 + s2, y0), (x0 + s2, y0 + s),
                    (x0 + s2, y0 + s2), (x0 + s, y0 + s2), (x0, y0 + s2), (x0, y0 + s)]
            # odd ring positions are edge midpoints; present only as a finer neighbour's corner
            present = [p for k, p in enumerate(ring) if k % 2 == 0 or p in corner_set]
            if len(present) == 4:
                v00, v10, v11, v01 = (vindex(p) for p in present)
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
            else:
                c = vindex((x0 + s, y0 + s))
                ids = [vindex(p) for p in present]
                for k in range(len(ids)):
                    tris.append((c, ids[k], ids[(k + 1) % len(ids)]))
    iv = np.array(verts, dtype=np.int64)
    tris = np.array(tris, dtype=np.int64)
    extent = np.array([2 * nx * fine, 2 * ny * fine])
    V, T, B = _finalize(iv, tris, h_fine / 2, lo, extent)

    cen = V[T].mean(axis=1)
    kl, kh = snapped.k_box()
    k0l, k0h = snapped.k0_box()
    tags = np.full(len(T), TAG_EXTERIOR)
    tags[in_box(cen, kl, kh, tol=0)] = TAG_TRANSITION
    tags[in_box(cen, k0l, k0h, tol=0)] = TAG_INSIDE_K0
    meta = {
        "kind": "body-fitted",
        "h_coarse": h_coarse,
        "h_fine": h_fine,
        "L": L,
        "delta": delta,
        "center": center.tolist(),
        "requested": {"L": region.half_width, "delta": region.collar, "center": list(region.center)},
        "levels": levels,
        "region": snapped,
    }
    return Mesh(V, T, B, tags, meta)


def cell_grid_size(mesh: Mesh) -> np.ndarray:
    """Side of the grid square each triangle was cut from (diameter / sqrt 2 for the
    diagonal split, diameter for fan triangles whose longest edge is a full side)."""
    v = mesh.vertices[mesh.cells]
    ext = v.max(axis=1) - v.min(axis=1)
    return ext.max(axis=1)


def mesh_region(mesh: Mesh) -> RegionSpec | None:
    return mesh.metadata.get("region")
