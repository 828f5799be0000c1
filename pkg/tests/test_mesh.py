"""Halfedge structure invariants and topology reports on the bundled models."""

import numpy as np
import pytest

from metricquad.errors import DisconnectedMesh, NonManifold, NonTriangleFace
from metricquad.mesh import TriangleMesh, topology_report
from metricquad.models import bundled_model, bundled_names

EXPECTED_TOPOLOGY = {
    "square_disk": dict(eulerCharacteristic=1, genus=0, boundaryLoops=1),
    "one_hole_rectangle": dict(eulerCharacteristic=0, genus=0, boundaryLoops=2),
    "two_hole_rectangle": dict(eulerCharacteristic=-1, genus=0, boundaryLoops=3),
    "torus": dict(eulerCharacteristic=0, genus=1, boundaryLoops=0),
    "cube": dict(eulerCharacteristic=2, genus=0, boundaryLoops=0),
    "tetrahedron": dict(eulerCharacteristic=2, genus=0, boundaryLoops=0),
    "genus2": dict(eulerCharacteristic=-2, genus=2, boundaryLoops=0),
}


@pytest.mark.parametrize("name", bundled_names())
def test_halfedge_invariants(name):
    m = bundled_model(name).mesh
    H = m.n_halfedges
    F = m.n_faces
    h = np.arange(H)

    # twin is a fixed-point-free involution pairing each edge's halfedges
    assert np.array_equal(m.he_twin[m.he_twin], h)
    assert np.all(m.he_twin != h)
    assert np.array_equal(m.he_edge[m.he_twin], m.he_edge)
    counts = np.bincount(m.he_edge, minlength=m.n_edges)
    assert np.all(counts == 2)

    # interior next-cycles have length three and stay in their face
    interior = h[:3 * F]
    assert np.array_equal(m.he_face[interior], interior // 3)
    nxt = m.he_next[interior]
    assert np.array_equal(m.he_face[nxt], interior // 3)
    assert np.array_equal(m.he_next[m.he_next[nxt]], interior)

    # boundary halfedges carry face -1 and chain dest -> origin
    exterior = h[3 * F:]
    assert np.all(m.he_face[exterior] == -1)
    for b in exterior:
        nb = m.he_next[b]
        assert m.he_face[nb] == -1
        assert m.he_origin[nb] == m.he_origin[m.he_twin[b]]

    # origin of a twin is the destination of the halfedge
    for f in range(min(F, 40)):
        for j in range(3):
            he = 3 * f + j
            assert m.halfedge_dest(he) == m.he_origin[m.he_twin[he]]


@pytest.mark.parametrize("name", bundled_names())
def test_vertex_stars_cover_outgoing_halfedges(name):
    m = bundled_model(name).mesh
    by_origin = [[] for _ in range(m.n_vertices)]
    for he in range(m.n_halfedges):
        by_origin[m.he_origin[he]].append(he)
    for v in range(m.n_vertices):
        out = list(m.vertex_outgoing(v))
        assert sorted(out) == sorted(by_origin[v])
        if m.is_boundary_vertex[v]:
            assert m.he_face[m.he_twin[out[0]]] == -1 or m.he_face[out[0]] == -1


@pytest.mark.parametrize("name", sorted(EXPECTED_TOPOLOGY))
def test_topology_reports(name):
    m = bundled_model(name).mesh
    rep = topology_report(m).to_dict()
    for key, val in EXPECTED_TOPOLOGY[name].items():
        assert rep[key] == val, (name, key, rep[key], val)
    assert rep["orientable"] is True
    assert rep["vertices"] - rep["edges"] + rep["faces"] == rep["eulerCharacteristic"]
    assert len(rep["loops"]) == rep["boundaryLoops"]
    assert m.euler_characteristic == rep["eulerCharacteristic"]


def test_boundary_loops_are_cycles():
    m = bundled_model("two_hole_rectangle").mesh
    loops = m.boundary_loops()
    assert len(loops) == 3
    seen = set()
    for loop in loops:
        assert loop[0] == min(loop)
        assert len(set(loop)) == len(loop)
        seen.update(loop)
    assert seen == set(np.nonzero(m.is_boundary_vertex)[0].tolist())


def test_rejects_non_triangles():
    with pytest.raises(NonTriangleFace):
        TriangleMesh(np.array([[0, 1, 2, 3]]))
    with pytest.raises(NonTriangleFace):
        TriangleMesh(np.array([[0, 1, 1]]))
    with pytest.raises(NonTriangleFace):
        TriangleMesh(np.array([[0, -1, 2]]))


def test_rejects_duplicate_directed_edge():
    with pytest.raises(NonManifold):
        TriangleMesh(np.array([[0, 1, 2], [0, 1, 3]]))


def test_rejects_pinched_vertex():
    with pytest.raises(NonManifold):
        TriangleMesh(np.array([[0, 1, 2], [0, 3, 4]]))


def test_rejects_isolated_vertex():
    with pytest.raises(NonManifold):
        TriangleMesh(np.array([[0, 1, 2]]), n_vertices=4)


def test_rejects_disconnected_components():
    with pytest.raises(DisconnectedMesh):
        TriangleMesh(np.array([[0, 1, 2], [3, 4, 5]]))


def test_copy_is_independent():
    m = bundled_model("square_disk").mesh
    c = m.copy()
    c.he_twin[0] = -99
    assert m.he_twin[0] != -99
    c.positions[0] = (9.0, 9.0, 9.0)
    assert not np.allclose(m.positions[0], (9.0, 9.0, 9.0))


def test_edge_endpoint_arrays_match_halfedges():
    m = bundled_model("tetrahedron").mesh
    ea, eb = m.edge_endpoint_arrays()
    for e in range(m.n_edges):
        he = m.edge_he[e]
        assert {ea[e], eb[e]} == {m.he_origin[he], m.halfedge_dest(he)}
