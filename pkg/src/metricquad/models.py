"""Bundled test surfaces with named singularity prescriptions.

Grid-based planar domains (a square, a rectangle with one or two holes),
a donut-embedded torus, a genus-2 surface made by doubling the two-hole
rectangle with opposite bulges, and two exact cone-metric polyhedra. Each
bundled model carries prescriptions whose indices sum to 4*chi, plus, for
the genus-2 model, one that deliberately fails the holonomy condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.spatial

from .mesh import TriangleMesh
from .metric import ConeMetric
from .prescription import SingularityPrescription


def grid_with_holes(nx, ny, cell=1.0, holes=()):
    """Right-triangle grid on [0, nx*cell] x [0, ny*cell] minus hole boxes.

    Holes are half-open cell-index boxes (i0, i1, j0, j1); they must not
    touch the outer boundary or each other, or the result pinches.
    """
    keep = np.ones((nx, ny), dtype=bool)
    for i0, i1, j0, j1 in holes:
        if not (0 < i0 < i1 < nx and 0 < j0 < j1 < ny):
            raise ValueError("hole box must be strictly interior")
        keep[i0:i1, j0:j1] = False

    used = np.zeros((nx + 1, ny + 1), dtype=bool)
    ci, cj = np.nonzero(keep)
    for di in (0, 1):
        for dj in (0, 1):
            used[ci + di, cj + dj] = True

    vid = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    order = np.argwhere(used.T)          # j-major scan, stable ids
    vid[order[:, 1], order[:, 0]] = np.arange(len(order))

    positions = np.zeros((len(order), 3))
    positions[:, 0] = order[:, 1] * cell
    positions[:, 1] = order[:, 0] * cell

    vb = np.zeros((nx + 1, ny + 1), dtype=bool)
    vb[0, :] = vb[nx, :] = vb[:, 0] = vb[:, ny] = True
    for i0, i1, j0, j1 in holes:
        vb[i0:i1 + 1, j0] = vb[i0:i1 + 1, j1] = True
        vb[i0, j0:j1 + 1] = vb[i1, j0:j1 + 1] = True

    faces = []
    for i, j in zip(ci, cj):
        v00, v10 = vid[i, j], vid[i + 1, j]
        v11, v01 = vid[i + 1, j + 1], vid[i, j + 1]
        if vb[i, j] and vb[i + 1, j + 1]:
            # an interior edge joining two boundary vertices would break
            # doubling; the other diagonal never has that problem here
            faces.append((v00, v10, v01))
            faces.append((v10, v11, v01))
        else:
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return TriangleMesh(np.array(faces), positions)


def square_disk(n=16):
    return grid_with_holes(n, n, cell=1.0 / n)


def two_hole_rectangle(nx=150, ny=75, cell=0.02):
    """Rectangle with two rectangular holes, chi = -1."""
    if nx % 5 or ny % 3:
        raise ValueError("nx must be divisible by 5 and ny by 3")
    holes = [(nx // 5, 2 * nx // 5, ny // 3, 2 * ny // 3),
             (3 * nx // 5, 4 * nx // 5, ny // 3, 2 * ny // 3)]
    return grid_with_holes(nx, ny, cell=cell, holes=holes)


def one_hole_rectangle(nx=60, ny=60, cell=1.0 / 30.0):
    """Square with one central hole, chi = 0."""
    if nx % 5 or ny % 5:
        raise ValueError("nx and ny must be divisible by 5")
    holes = [(2 * nx // 5, 3 * nx // 5, 2 * ny // 5, 3 * ny // 5)]
    return grid_with_holes(nx, ny, cell=cell, holes=holes)


def flat_torus(n=4, side=1.0):
    """n x n periodic grid embedded with the exact unit-lattice metric.

    Positions split as A(i) + B(j) with A a +-x zigzag of step `side` and
    B a regular n-gon of side `side` in the yz plane. The two subspaces
    are orthogonal, so every lattice edge has length `side` and every cell
    diagonal exactly side*sqrt(2): the embedding is isometric to the flat
    square torus and the flow is a no-op up to roundoff. The zigzag folds
    columns i and i+2 onto each other in space, which is harmless for
    anything driven by edge lengths. n must be even (and >= 4) so the
    zigzag closes and edges stay combinatorially simple.
    """
    if n < 4 or n % 2:
        raise ValueError("flat_torus needs even n >= 4")
    faces = []
    for j in range(n):
        for i in range(n):
            a = j * n + i
            b = j * n + (i + 1) % n
            c = ((j + 1) % n) * n + (i + 1) % n
            d = ((j + 1) % n) * n + i
            faces.append((a, b, c))
            faces.append((a, c, d))
    idx = np.arange(n * n)
    i, j = idx % n, idx // n
    r = side / (2.0 * np.sin(np.pi / n))
    positions = np.stack([side * (i % 2).astype(float),
                          r * np.cos(2.0 * np.pi * j / n),
                          r * np.sin(2.0 * np.pi * j / n)], axis=1)
    return TriangleMesh(np.array(faces), positions)


def flat_torus_metric(mesh, n, side=1.0):
    """Exact flat lengths for flat_torus connectivity: unit cells, sqrt(2)
    diagonals."""
    a, b = mesh.edge_endpoint_arrays()
    di = np.minimum((b % n - a % n) % n, (a % n - b % n) % n)
    dj = np.minimum((b // n - a // n) % n, (a // n - b // n) % n)
    lengths = np.where((di > 0) & (dj > 0), np.sqrt(2.0), 1.0) * side
    return ConeMetric(mesh, lengths)


def double_with_bulge(base, bulge, rho):
    """Glue two copies of a planar disk-with-holes along their boundary,
    bulged to +-z so the result is an embedded closed surface.

    Returns (mesh, other_copy) where other_copy[v] is v's twin vertex in
    the opposite copy (boundary vertices are their own twin).
    """
    P = base.positions
    boundary = base.is_boundary_vertex
    segs = []
    for loop in base.boundary_loops():
        segs.extend(zip(loop, loop[1:] + loop[:1]))
    d = np.full(base.n_vertices, np.inf)
    for a, b in segs:
        pa, pb = P[a, :2], P[b, :2]
        w = pb - pa
        L2 = float(w @ w)
        rel = P[:, :2] - pa
        t = np.clip((rel @ w) / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(P))
        d = np.minimum(d, np.linalg.norm(rel - t[:, None] * w, axis=1))
    z = bulge * d / (d + rho)

    V = base.n_vertices
    other = np.arange(V)
    interior = np.nonzero(~boundary)[0]
    other[interior] = V + np.arange(len(interior))
    top = P.copy()
    top[:, 2] = z
    bottom = P[interior].copy()
    bottom[:, 2] = -z[interior]
    positions = np.vstack([top, bottom])

    flipped = base.faces[:, ::-1]
    faces = np.vstack([base.faces, other[flipped]])
    mesh = TriangleMesh(faces, positions)

    full_other = np.arange(mesh.n_vertices)
    full_other[:V] = other
    full_other[other[interior]] = interior
    return mesh, full_other


def genus2_surface(nx=90, ny=45, cell=0.02, bulge=0.15, rho=0.15):
    base = two_hole_rectangle(nx, ny, cell)
    mesh, other = double_with_bulge(base, bulge, rho)
    return mesh, other


def tetrahedron():
    """Regular tetrahedron; every vertex is an exact k=+2 cone."""
    positions = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0],
                          [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    return TriangleMesh(faces, positions)


def cube():
    """Unit cube, split quads; every corner is an exact k=+1 cone."""
    positions = np.array([[x, y, z] for z in (0.0, 1.0)
                          for y in (0.0, 1.0) for x in (0.0, 1.0)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4),
             (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return TriangleMesh(np.array(faces), positions)


def random_disk(n, seed):
    """Delaunay triangulation of n uniform points in the unit square."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    tri = scipy.spatial.Delaunay(pts)
    faces = tri.simplices.astype(np.int64)
    p = pts[faces]
    area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    faces[area2 < 0] = faces[area2 < 0][:, ::-1]
    positions = np.zeros((n, 3))
    positions[:, :2] = pts
    return TriangleMesh(faces, positions)


def nearest_vertex(mesh, point, interior=False):
    point = np.asarray(point, dtype=float)
    if point.shape == (2,):
        point = np.array([point[0], point[1], 0.0])
    d2 = ((mesh.positions - point) ** 2).sum(axis=1)
    if interior:
        d2 = np.where(mesh.is_boundary_vertex, np.inf, d2)
    return int(np.argmin(d2))


def _corner_vertices(mesh):
    """Vertices of a planar grid disk at the bounding-box corners."""
    P = mesh.positions
    lo, hi = P.min(axis=0), P.max(axis=0)
    out = []
    for x in (lo[0], hi[0]):
        for y in (lo[1], hi[1]):
            out.append(nearest_vertex(mesh, (x, y)))
    return sorted(out)


@dataclass
class BundledModel:
    name: str
    mesh: TriangleMesh
    prescriptions: dict
    other_copy: np.ndarray | None = None


def _presc(pairs):
    return SingularityPrescription(pairs)


@lru_cache(maxsize=None)
def bundled_model(name) -> BundledModel:
    if name == "square_disk":
        mesh = square_disk(16)
        corners = _corner_vertices(mesh)
        return BundledModel(name, mesh,
                            {"corners": _presc({v: 1 for v in corners})})

    if name == "torus":
        mesh = flat_torus(12)
        return BundledModel(name, mesh, {"flat": _presc({})})

    if name == "two_hole_rectangle":
        mesh = two_hole_rectangle()
        W, H = 3.0, 1.5

        def at(x, y):
            return nearest_vertex(mesh, (x, y), interior=True)

        one = {at(W / 2, H / 2): -4}
        two = {at(W / 2, H / 6): -2, at(W / 2, 5 * H / 6): -2}
        four = {at(0.1 * W, H / 2): -1, at(0.9 * W, H / 2): -1,
                at(W / 2, H / 6): -1, at(W / 2, 5 * H / 6): -1}
        eight = [(x, y) for x in (0.1 * W, W / 2, 0.9 * W)
                 for y in (H / 6, 5 * H / 6)]
        eight += [(0.1 * W, H / 2), (0.9 * W, H / 2)]
        twelve = {at(x, y): -1 for x, y in eight}
        twelve.update({v: 1 for v in _corner_vertices(mesh)})
        return BundledModel(name, mesh, {
            "one_saddle": _presc(one),
            "two_saddle": _presc(two),
            "four_saddle": _presc(four),
            "twelve": _presc(twelve),
        })

    if name == "one_hole_rectangle":
        mesh = one_hole_rectangle()
        sites = [(0.4, 0.4), (1.6, 0.4), (1.6, 1.6), (0.4, 1.6)]
        entries = {nearest_vertex(mesh, s, interior=True): -1 for s in sites}
        entries.update({v: 1 for v in _corner_vertices(mesh)})
        return BundledModel(name, mesh, {"four_plus_four": _presc(entries)})

    if name == "genus2":
        mesh, other = genus2_surface()
        W, H = 1.8, 0.9

        def pair(x, y):
            v = nearest_vertex(mesh, (x, y, 0.2), interior=True)
            return v, int(other[v])

        mid1, mid2 = pair(W / 2, H / 6), pair(W / 2, 5 * H / 6)
        end1, end2 = pair(0.1 * W, H / 2), pair(0.9 * W, H / 2)
        four = {mid1[0]: -2, mid1[1]: -2, mid2[0]: -2, mid2[1]: -2}
        eight = {v: -1 for vs in (mid1, mid2, end1, end2) for v in vs}
        one = {nearest_vertex(mesh, (W / 2, H / 2, 0.2)): -8}
        return BundledModel(name, mesh, {
            "four_cones": _presc(four),
            "eight_cones": _presc(eight),
            "one_cone": _presc(one),
        }, other_copy=other)

    if name == "tetrahedron":
        mesh = tetrahedron()
        return BundledModel(name, mesh,
                            {"corners": _presc({v: 2 for v in range(4)})})

    if name == "cube":
        mesh = cube()
        return BundledModel(name, mesh,
                            {"corners": _presc({v: 1 for v in range(8)})})

    raise KeyError(f"unknown bundled model {name!r}; "
                   f"available: {', '.join(bundled_names())}")


def bundled_names():
    return ["cube", "genus2", "one_hole_rectangle", "square_disk",
            "tetrahedron", "torus", "two_hole_rectangle"]
