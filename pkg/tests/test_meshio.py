"""OFF/OBJ reading and writing."""

import numpy as np
import pytest

from metricquad.errors import NonTriangleFace, ParseError
from metricquad.meshio import load_mesh, obj_quads, obj_with_corner_uvs, save_off
from metricquad.models import bundled_model


def test_off_round_trip_is_exact(tmp_path):
    m = bundled_model("tetrahedron").mesh
    path = tmp_path / "tet.off"
    save_off(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.faces, m.faces)
    assert np.array_equal(back.positions, m.positions)


def test_load_off_from_literal_text():
    text = "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n"
    m = load_mesh(text, fmt="off")
    assert m.n_vertices == 4 and m.n_faces == 2
    assert m.positions[2].tolist() == [1.0, 1.0, 0.0]


def test_load_off_counts_on_header_line():
    text = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    m = load_mesh(text, fmt="off")
    assert m.n_faces == 1


def test_load_obj_with_negative_indices():
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"
    m = load_mesh(text, fmt="obj")
    assert m.faces.tolist() == [[0, 1, 2]]


def test_load_obj_splits_vertex_texture_references():
    text = ("v 0 0 0\nv 1 0 0\nv 0 1 0\n"
            "vt 0 0\nvt 1 0\nvt 0 1\n"
            "f 1/1 2/2 3/3\n")
    m = load_mesh(text, fmt="obj")
    assert m.faces.tolist() == [[0, 1, 2]]


def test_obj_writers_emit_parseable_geometry():
    positions = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                          [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    quads = np.array([[0, 1, 2, 3]])
    text = obj_quads(positions, quads)
    lines = text.strip().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 4
    face_rows = [ln for ln in lines if ln.startswith("f ")]
    assert face_rows == ["f 1 2 3 4"]
    with pytest.raises(NonTriangleFace):
        load_mesh(text, fmt="obj")

    faces = np.array([[0, 1, 2], [0, 2, 3]])
    uvs = np.zeros((2, 3, 2))
    tex = obj_with_corner_uvs(positions, faces, uvs)
    tlines = tex.strip().splitlines()
    assert sum(ln.startswith("vt ") for ln in tlines) == 6
    assert all("/" in ln.split()[1] for ln in tlines if ln.startswith("f "))
    parsed = load_mesh(tex, fmt="obj")
    assert parsed.n_faces == 2


def test_rejects_malformed_off():
    with pytest.raises(ParseError):
        load_mesh("", fmt="off")
    with pytest.raises(ParseError):
        load_mesh("OFF\n", fmt="off")
    with pytest.raises(ParseError):
        load_mesh("FOO\n3 1 0\n", fmt="off")
    with pytest.raises(ParseError):
        load_mesh("OFF\n3 1 0\n0 0 0\n1 0 0\n", fmt="off")


def test_rejects_unknown_extension(tmp_path):
    path = tmp_path / "mesh.stl"
    path.write_text("whatever")
    with pytest.raises(ParseError):
        load_mesh(path)
