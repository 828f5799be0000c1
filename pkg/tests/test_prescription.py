"""Singularity budgets: validation messages and serialization."""

import pytest

from metricquad.errors import UnknownVertex
from metricquad.models import bundled_model
from metricquad.prescription import (SingularityPrescription,
                                     validate_prescription)


def test_iteration_is_sorted_and_indexed():
    p = SingularityPrescription({7: -1, 2: 1, 5: -2})
    assert list(p) == [(2, 1), (5, -2), (7, -1)]
    assert p.total_index() == -2
    assert p.index_of(5) == -2
    assert p.index_of(99) == 0


def test_json_round_trip():
    import json

    p = SingularityPrescription({3: -4, 0: 1})
    text = p.to_json()
    assert json.loads(text) == [{"vertex": 0, "index": 1},
                                {"vertex": 3, "index": -4}]
    assert list(SingularityPrescription.from_json(text)) == list(p)
    assert list(SingularityPrescription.from_json(json.loads(text))) == list(p)


def test_bundled_budgets_meet_their_topology():
    for name in ("square_disk", "torus", "two_hole_rectangle",
                 "one_hole_rectangle", "genus2", "cube", "tetrahedron"):
        bm = bundled_model(name)
        chi = bm.mesh.euler_characteristic
        for presc in bm.prescriptions.values():
            verdict = validate_prescription(bm.mesh, presc)
            assert verdict.ok, (name, verdict.messages)
            assert presc.total_index() == 4 * chi


def test_square_disk_corner_budget_verdict():
    bm = bundled_model("square_disk")
    verdict = validate_prescription(bm.mesh, bm.prescriptions["corners"])
    assert verdict.ok
    assert verdict.total_index == 4
    assert verdict.required_index == 4
    assert verdict.residual == 0
    assert verdict.to_dict()["residualPiHalf"] == 0
    assert verdict.messages == []


def test_wrong_total_is_reported_in_quarter_turns():
    bm = bundled_model("square_disk")
    p = SingularityPrescription({v: k for (v, k), _ in
                                 zip(bm.prescriptions["corners"], range(3))})
    verdict = validate_prescription(bm.mesh, p)
    assert not verdict.ok
    assert verdict.residual == -1
    assert any("index sum" in msg for msg in verdict.messages)


def test_zero_index_entries_are_rejected():
    bm = bundled_model("square_disk")
    entries = dict(iter(bm.prescriptions["corners"]))
    entries[next(iter(entries))] = 0
    verdict = validate_prescription(bm.mesh, SingularityPrescription(entries))
    assert not verdict.ok
    assert any("0" in msg for msg in verdict.messages)


def test_cone_angle_limits():
    bm = bundled_model("square_disk")
    mesh = bm.mesh
    corners = [v for v, _ in bm.prescriptions["corners"]]
    interior = next(v for v in range(mesh.n_vertices)
                    if not mesh.is_boundary_vertex[v])

    # a boundary vertex cannot absorb more than one quarter turn
    p = SingularityPrescription({corners[0]: 2, corners[1]: 1, corners[2]: 1})
    verdict = validate_prescription(mesh, p)
    assert not verdict.ok

    # an interior vertex caps at three quarter turns (positive angle left)
    p = SingularityPrescription({interior: 4, corners[0]: -1,
                                 corners[1]: 1, corners[2]: -1,
                                 corners[3]: 1})
    verdict = validate_prescription(mesh, p)
    assert not verdict.ok

    # indices below the caps pass, arbitrarily negative ones included
    p = SingularityPrescription({interior: -4, **{c: 2 for c in corners}})
    verdict = validate_prescription(mesh, p)
    assert not verdict.ok  # boundary cap still applies

    p = SingularityPrescription({interior: 3,
                                 corners[0]: 1, corners[1]: -1,
                                 corners[2]: 1})
    verdict = validate_prescription(mesh, p)
    assert verdict.ok


def test_unknown_vertex_raises():
    bm = bundled_model("tetrahedron")
    with pytest.raises(UnknownVertex):
        validate_prescription(bm.mesh, SingularityPrescription({99: 2}))
