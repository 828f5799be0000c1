"""Reading OFF/OBJ triangle meshes and writing OBJ with wedge UVs."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import NonTriangleFace, ParseError
from .mesh import TriangleMesh


def _tokens(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def _parse_off(text):
    toks = _tokens(text)
    try:
        header = next(toks)
    except StopIteration:
        raise ParseError("empty OFF file") from None
    if header[0].upper() != "OFF":
        raise ParseError("missing OFF header")
    counts = header[1:] if len(header) > 1 else next(toks, None)
    if counts is None or len(counts) < 3:
        raise ParseError("missing OFF counts line")
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except ValueError:
        raise ParseError("bad OFF counts") from None
    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        row = next(toks, None)
        if row is None or len(row) < 3:
            raise ParseError(f"OFF vertex line {i} truncated")
        verts[i] = [float(row[0]), float(row[1]), float(row[2])]
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        row = next(toks, None)
        if row is None:
            raise ParseError(f"OFF face line {i} missing")
        k = int(row[0])
        if k != 3:
            raise NonTriangleFace(f"OFF face {i} has {k} vertices")
        if len(row) < 4:
            raise ParseError(f"OFF face line {i} truncated")
        faces[i] = [int(row[1]), int(row[2]), int(row[3])]
    return verts, faces


def _parse_obj(text):
    verts = []
    faces = []
    for row in _tokens(text):
        if row[0] == "v":
            if len(row) < 4:
                raise ParseError("OBJ vertex line truncated")
            verts.append([float(row[1]), float(row[2]), float(row[3])])
        elif row[0] == "f":
            idx = []
            for part in row[1:]:
                head = part.split("/", 1)[0]
                if not head:
                    raise ParseError(f"OBJ face reference '{part}' has no vertex index")
                i = int(head)
                # negative indices count back from the current vertex list
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) != 3:
                raise NonTriangleFace(f"OBJ face with {len(idx)} vertices")
            faces.append(idx)
    if not verts:
        raise ParseError("OBJ file has no vertices")
    if not faces:
        raise ParseError("OBJ file has no faces")
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def load_mesh(path_or_text, fmt=None) -> TriangleMesh:
    """Load a triangle mesh from an OFF or OBJ file (or literal text).

    Parameters
    ----------
    path_or_text : str | Path
        File path, or the file contents themselves when ``fmt`` is given.
    fmt : {"off", "obj"}, optional
        Forced format. Inferred from the extension when reading a path.
    """
    text = None
    if isinstance(path_or_text, Path) or (
            isinstance(path_or_text, str) and fmt is None):
        p = Path(path_or_text)
        if fmt is None:
            ext = p.suffix.lower().lstrip(".")
            if ext not in ("off", "obj"):
                raise ParseError(f"cannot infer format from '{p.name}'")
            fmt = ext
        text = p.read_text()
    elif isinstance(path_or_text, (str, bytes)):
        text = path_or_text.decode() if isinstance(path_or_text, bytes) else path_or_text
        if text and os.sep not in text and "\n" not in text and Path(text).exists():
            text = Path(text).read_text()
    if text is None:
        raise ParseError("nothing to parse")
    fmt = (fmt or "").lower()
    if fmt == "off":
        verts, faces = _parse_off(text)
    elif fmt == "obj":
        verts, faces = _parse_obj(text)
    else:
        raise ParseError(f"unknown format '{fmt}'")
    return TriangleMesh(faces, positions=verts, n_vertices=len(verts))


def _fmt(x: float) -> str:
    # repr gives the shortest digit string that round-trips, which keeps
    # artifact bytes deterministic across runs
    return repr(float(x))


def save_off(mesh: TriangleMesh, path):
    pos = mesh.positions
    if pos is None:
        pos = np.zeros((mesh.n_vertices, 3))
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}"]
    for p in pos:
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(lines) + "\n")


def obj_with_corner_uvs(positions, faces, corner_uvs) -> str:
    """OBJ text with one vt per corner so seams stay sharp (f v/vt form)."""
    out = []
    for p in positions:
        out.append(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    corner_uvs = np.asarray(corner_uvs, dtype=np.float64)
    for f in range(len(faces)):
        for k in range(3):
            uv = corner_uvs[f, k]
            out.append(f"vt {_fmt(uv[0])} {_fmt(uv[1])}")
    for f in range(len(faces)):
        a, b, c = (int(x) + 1 for x in faces[f])
        t = 3 * f + 1
        out.append(f"f {a}/{t} {b}/{t + 1} {c}/{t + 2}")
    return "\n".join(out) + "\n"


def obj_quads(positions, quads) -> str:
    out = []
    for p in positions:
        out.append(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    for q in quads:
        out.append("f " + " ".join(str(int(i) + 1) for i in q))
    return "\n".join(out) + "\n"
