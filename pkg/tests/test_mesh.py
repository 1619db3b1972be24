import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from cglm.mesh import (
    TAG_EXTERIOR, TAG_INSIDE_K0, TAG_TRANSITION, Domain, Mesh, RegionSpec, build_body_fitted_mesh,
    build_uniform_mesh, locate_cell,
)

UNIT = Domain.unit(2)
REGION = RegionSpec((0.5, 0.5), 0.05, 0.05)


def test_uniform_counts_and_measure():
    m = build_uniform_mesh(UNIT, 2)
    assert (m.n_vertices, m.n_cells) == (9, 8)
    m = build_uniform_mesh(UNIT, 10)
    assert m.h_max == pytest.approx(np.sqrt(2) / 10)
    assert m.measures.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(m.shape_ratios, (np.sqrt(2) - 1) / 2)


def test_uniform_1d():
    m = build_uniform_mesh(Domain.unit(1), 8)
    assert m.n_cells == 8 and m.boundary.sum() == 2
    assert m.measures.sum() == pytest.approx(1.0)


def test_body_fitted_fine_cells_in_k0():
    m = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 160)
    lo, hi = REGION.k0_box()
    verts = m.vertices[m.cells]
    touches = np.all(verts.max(axis=1) > lo, axis=1) & np.all(verts.min(axis=1) < hi, axis=1)
    # h_tau is the longest edge; 1/160 legs give a diagonal of sqrt(2)/160
    assert m.diameters[touches].max() <= np.sqrt(2) / 160 + 1e-12
    assert m.measures.sum() == pytest.approx(1.0, rel=1e-12)


def test_body_fitted_degenerate_equals_uniform():
    a = build_body_fitted_mesh(UNIT, REGION, 1 / 20, 1 / 20)
    b = build_uniform_mesh(UNIT, 20)
    assert np.array_equal(a.cells, b.cells)
    assert np.allclose(a.vertices, b.vertices)


def test_body_fitted_shape_regularity():
    uni = build_uniform_mesh(UNIT, 20)
    m = build_body_fitted_mesh(UNIT, REGION, 1 / 20, 1 / 320)
    _, counts = m.edges()
    assert counts.max() <= 2
    assert m.shape_ratios.min() >= 0.3 * uni.shape_ratios.min()


def test_body_fitted_tags_and_snapping():
    m = build_body_fitted_mesh(UNIT, RegionSpec((0.5, 0.5), 0.052, 0.049), 1 / 10, 1 / 80)
    r = m.metadata["region"]
    assert r.half_width * 80 == pytest.approx(round(r.half_width * 80))
    assert r.collar * 80 == pytest.approx(round(r.collar * 80))
    assert set(np.unique(m.tags)) == {TAG_INSIDE_K0, TAG_TRANSITION, TAG_EXTERIOR}
    assert m.measures[m.tags == TAG_INSIDE_K0].sum() == pytest.approx((2 * r.half_width) ** 2)


@pytest.mark.parametrize("hc,hf,msg", [
    (1 / 10, 1 / 30, "power of two"),
    (1 / 160, 1 / 10, "h_fine"),
])
def test_body_fitted_rejects(hc, hf, msg):
    with pytest.raises(ValueError, match=msg):
        build_body_fitted_mesh(UNIT, REGION, hc, hf)


def test_body_fitted_collar_too_thin_names_delta():
    with pytest.raises(ValueError, match="delta"):
        build_body_fitted_mesh(UNIT, RegionSpec((0.5, 0.5), 0.05, 0.001), 1 / 10, 1 / 80)


def test_locate_vertex_and_centroid():
    m = build_uniform_mesh(UNIT, 4)
    idx, lam = locate_cell(m, m.centroids[5])
    assert idx == 5
    assert np.allclose(lam, 1 / 3)
    c, lam = locate_cell(m, m.vertices[m.cells[3, 1]])
    assert np.isclose(lam.max(), 1.0)
    with pytest.raises(ValueError):
        m.locate(np.array([[1.5, 0.5]]))


def test_text_roundtrip():
    m = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 40)
    back = Mesh.from_text(m.to_text())
    assert np.array_equal(back.cells, m.cells)
    assert np.allclose(back.vertices, m.vertices)
    assert np.array_equal(back.tags, m.tags)


@given(st.integers(1, 24))
def test_uniform_area_and_conformity(n):
    m = build_uniform_mesh(UNIT, n)
    _, counts = m.edges()
    assert counts.max() <= 2
    assert abs(m.measures.sum() - 1) <= 1e-12


@given(
    cx=st.integers(12, 28), cy=st.integers(12, 28),
    L=st.integers(1, 4), d=st.integers(1, 4), levels=st.integers(0, 3),
)
def test_body_fitted_properties(cx, cy, L, d, levels):
    hc = 1 / 10
    hf = hc / 2**levels
    # center on the fine grid of the finest level used here (1/80)
    region = RegionSpec((cx / 40, cy / 40), L * hf, d * hf)
    lo, hi = region.k_box()
    assume(lo.min() >= 0 and hi.max() <= 1)
    m = build_body_fitted_mesh(UNIT, region, hc, hf)
    _, counts = m.edges()
    assert counts.max() <= 2
    assert abs(m.measures.sum() - 1) <= 1e-12
    assert m.shape_ratios.min() >= 0.2


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=50))
def test_locate_reconstructs(points):
    m = build_body_fitted_mesh(UNIT, REGION, 1 / 10, 1 / 40)
    pts = np.array(points)
    idx, lam = m.locate(pts)
    assert np.all(lam >= 0) and np.allclose(lam.sum(axis=1), 1)
    rec = np.einsum("nk,nkd->nd", lam, m.vertices[m.cells[idx]])
    assert np.abs(rec - pts).max() <= 1e-12
