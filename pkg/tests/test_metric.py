"""Edge-length metrics: corner angles, areas, curvature, and scaling."""

import numpy as np
import pytest

from metricquad.errors import DegenerateTriangle
from metricquad.mesh import TriangleMesh
from metricquad.metric import (ConeMetric, ScaledMetric, check_gauss_bonnet,
                               corner_angles, face_areas, metric_from_embedding,
                               target_curvature, total_area, vertex_angle_sums,
                               vertex_curvature)
from metricquad.models import bundled_model

CLOSED = ("cube", "tetrahedron", "torus", "genus2")
BORDERED = ("square_disk", "one_hole_rectangle", "two_hole_rectangle")


def single_triangle(l01, l12, l20):
    mesh = TriangleMesh(np.array([[0, 1, 2]]))
    lengths = np.zeros(3)
    for (a, b), l in (((0, 1), l01), ((1, 2), l12), ((2, 0), l20)):
        lengths[mesh.he_edge[mesh.halfedge_between(a, b)]] = l
    return ConeMetric(mesh, lengths)


def test_right_triangle_angles_and_area():
    met = single_triangle(5.0, 3.0, 4.0)
    ang = corner_angles(met)
    mesh = met.mesh
    # the angle in slot j sits at the vertex opposite halfedge j
    at_vertex = {mesh.halfedge_dest(mesh.he_next[j]): ang[j] for j in range(3)}
    assert at_vertex[2] == pytest.approx(np.pi / 2, abs=1e-12)
    assert at_vertex[0] == pytest.approx(np.arctan2(3, 4), abs=1e-12)
    assert at_vertex[1] == pytest.approx(np.arctan2(4, 3), abs=1e-12)
    assert face_areas(met)[0] == pytest.approx(6.0, abs=1e-12)
    assert total_area(met) == pytest.approx(6.0, abs=1e-12)


def test_halfedge_lengths_follow_edges():
    met = single_triangle(5.0, 3.0, 4.0)
    lh = met.halfedge_lengths()
    m = met.mesh
    assert lh.shape == (m.n_interior_halfedges,)
    assert np.array_equal(lh, met.lengths[m.he_edge[:m.n_interior_halfedges]])


def test_embedding_metric_matches_positions():
    m = bundled_model("cube").mesh
    met = metric_from_embedding(m)
    ea, eb = m.edge_endpoint_arrays()
    d = np.linalg.norm(m.positions[ea] - m.positions[eb], axis=1)
    assert np.allclose(met.lengths, d, rtol=0, atol=0)


def test_closed_model_cone_defects():
    cube = metric_from_embedding(bundled_model("cube").mesh)
    assert np.allclose(vertex_curvature(cube), np.pi / 2, atol=1e-12)
    tet = metric_from_embedding(bundled_model("tetrahedron").mesh)
    assert np.allclose(vertex_curvature(tet), np.pi, atol=1e-12)


def test_square_disk_boundary_curvature():
    m = bundled_model("square_disk").mesh
    met = metric_from_embedding(m)
    K = vertex_curvature(met)
    interior = ~m.is_boundary_vertex
    assert np.abs(K[interior]).max() < 1e-12
    corners = [v for v in np.nonzero(m.is_boundary_vertex)[0]
               if abs(K[v]) > 1e-6]
    assert len(corners) == 4
    assert np.allclose(K[corners], np.pi / 2, atol=1e-12)


@pytest.mark.parametrize("name", CLOSED + BORDERED)
def test_gauss_bonnet_identity(name):
    m = bundled_model(name).mesh
    met = metric_from_embedding(m)
    assert abs(check_gauss_bonnet(met)) < 1e-8

    # the identity is combinatorial: it survives arbitrary conformal scaling
    rng = np.random.default_rng(11)
    scaled = ScaledMetric.from_metric(met)
    u = rng.normal(0.0, 0.05, m.n_vertices)
    assert abs(check_gauss_bonnet(scaled.metric(u))) < 1e-8


def test_scaled_metric_formula():
    m = bundled_model("tetrahedron").mesh
    met = metric_from_embedding(m)
    scaled = ScaledMetric.from_metric(met)
    rng = np.random.default_rng(3)
    u = rng.normal(0.0, 0.2, m.n_vertices)
    ea, eb = m.edge_endpoint_arrays()
    expect = np.exp(u[ea]) * met.lengths * np.exp(u[eb])
    assert np.allclose(scaled.lengths(u), expect, rtol=1e-15, atol=0)
    assert np.allclose(scaled.lengths(np.zeros(m.n_vertices)), met.lengths)


def test_target_curvature_places_quarter_turns():
    bm = bundled_model("square_disk")
    presc = bm.prescriptions["corners"]
    kbar = target_curvature(bm.mesh, presc)
    singular = dict(iter(presc))
    for v in range(bm.mesh.n_vertices):
        assert kbar[v] == pytest.approx(singular.get(v, 0) * np.pi / 2)
    assert kbar.sum() == pytest.approx(2 * np.pi * bm.mesh.euler_characteristic)


def test_degenerate_triangle_detection():
    # a clipped needle whose recovered angles cannot sum back to pi
    with pytest.raises(DegenerateTriangle):
        corner_angles(single_triangle(1e-8, 1.0, 1.00000001))
    ang = corner_angles(single_triangle(1e-8, 1.0, 1.00000001), strict=False)
    assert np.all(np.isfinite(ang))


def test_rejects_nonpositive_lengths():
    mesh = TriangleMesh(np.array([[0, 1, 2]]))
    with pytest.raises(Exception):
        ConeMetric(mesh, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(Exception):
        ConeMetric(mesh, np.array([1.0, np.inf, 1.0]))


def test_metric_dict_round_trip_is_exact():
    met = metric_from_embedding(bundled_model("tetrahedron").mesh)
    back = ConeMetric.from_dict(met.mesh, met.to_dict())
    assert np.array_equal(back.lengths, met.lengths)


def test_vertex_angle_sums_consistent_with_curvature():
    m = bundled_model("square_disk").mesh
    met = metric_from_embedding(m)
    sums = vertex_angle_sums(met)
    K = vertex_curvature(met)
    flat = np.where(m.is_boundary_vertex, np.pi, 2 * np.pi)
    assert np.allclose(K, flat - sums, atol=1e-12)
