"""Intrinsic edge flips and Delaunay restoration.

scipy's Delaunay triangulation of generic points is unique, so flipping
random interior edges and re-running the intrinsic pass must restore the
original triangulation's edge-length multiset exactly.
"""

import numpy as np
import pytest

from metricquad.delaunay import (DELAUNAY_SLACK, edge_angle_sums, flip_edge,
                                 intrinsic_delaunay, is_delaunay)
from metricquad.errors import NonFlippable
from metricquad.metric import (metric_from_embedding, total_area,
                               vertex_angle_sums)
from metricquad.models import random_disk


def interior_edges(mesh):
    return [e for e in range(mesh.n_edges) if not mesh.is_boundary_edge[e]]


def all_delaunay(met):
    return all(is_delaunay(met, e) for e in range(met.mesh.n_edges))


def flip_some(mesh, lengths, edges, want):
    done = []
    for e in edges:
        if len(done) >= want:
            break
        try:
            flip_edge(mesh, lengths, int(e))
            done.append(int(e))
        except NonFlippable:
            continue
    return done


def test_generic_planar_delaunay_is_recognized():
    mesh = random_disk(64, seed=5)
    met = metric_from_embedding(mesh)
    assert all_delaunay(met)
    assert np.all(edge_angle_sums(met) <= np.pi + DELAUNAY_SLACK)


def test_flip_matches_planar_geometry():
    mesh = random_disk(64, seed=5)
    met = metric_from_embedding(mesh)
    for e in interior_edges(mesh):
        he = mesh.edge_he[e]
        opp_a = mesh.halfedge_dest(mesh.he_next[he])
        opp_b = mesh.halfedge_dest(mesh.he_next[mesh.he_twin[he]])
        try:
            flip_edge(mesh, met.lengths, e)
        except NonFlippable:
            continue
        expect = np.linalg.norm(mesh.positions[opp_a] - mesh.positions[opp_b])
        assert met.lengths[e] == pytest.approx(expect, rel=1e-12)
        assert set(mesh.edge_endpoints(e)) == {opp_a, opp_b}
        return
    pytest.fail("no flippable interior edge found")


def test_flips_preserve_the_metric_and_delaunay_restores_it():
    mesh = random_disk(80, seed=12)
    met = metric_from_embedding(mesh)
    sorted_before = np.sort(met.lengths.copy())
    area_before = total_area(met)
    sums_before = vertex_angle_sums(met)

    rng = np.random.default_rng(0)
    flipped = flip_some(mesh, met.lengths,
                        rng.permutation(interior_edges(mesh)), 12)
    assert len(flipped) == 12
    assert not all_delaunay(met)

    # the surface itself never changed
    assert total_area(met) == pytest.approx(area_before, rel=1e-9)
    assert np.allclose(vertex_angle_sums(met), sums_before, atol=1e-9)

    report = intrinsic_delaunay(met)
    assert report.n_flips >= 1
    assert all_delaunay(met)
    assert np.allclose(np.sort(met.lengths), sorted_before, rtol=1e-9)
    assert np.allclose(vertex_angle_sums(met), sums_before, atol=1e-9)


def test_intrinsic_delaunay_is_idempotent():
    mesh = random_disk(40, seed=2)
    met = metric_from_embedding(mesh)
    report = intrinsic_delaunay(met)
    assert report.n_flips == 0
    assert report.flipped == []


def test_boundary_edges_do_not_flip():
    mesh = random_disk(30, seed=4)
    met = metric_from_embedding(mesh)
    e = int(np.nonzero(mesh.is_boundary_edge)[0][0])
    with pytest.raises(NonFlippable):
        flip_edge(mesh, met.lengths, e)


def test_flip_keeps_edge_and_face_ids():
    mesh = random_disk(50, seed=9)
    met = metric_from_embedding(mesh)
    n_edges, n_faces = mesh.n_edges, mesh.n_faces
    for e in interior_edges(mesh):
        faces_before = {mesh.he_face[mesh.edge_he[e]],
                        mesh.he_face[mesh.he_twin[mesh.edge_he[e]]]}
        try:
            flip_edge(mesh, met.lengths, e)
        except NonFlippable:
            continue
        assert mesh.n_edges == n_edges and mesh.n_faces == n_faces
        faces_after = {mesh.he_face[mesh.edge_he[e]],
                       mesh.he_face[mesh.he_twin[mesh.edge_he[e]]]}
        assert faces_after == faces_before
        return
    pytest.fail("no flippable interior edge found")
