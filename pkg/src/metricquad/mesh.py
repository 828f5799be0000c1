"""Halfedge triangle mesh with explicit boundary halfedges.

The mesh is held in flat numpy arrays. Interior halfedges are numbered
3*f, 3*f+1, 3*f+2 for face f (so ``h // 3`` recovers the face); boundary
halfedges are appended after the interior block with face id -1 and are
chained by ``next`` along each boundary loop. Every edge therefore owns
exactly two halfedges, and boundary walks need no special casing.

Vertex positions are optional payload: everything downstream of the flow
works on intrinsic edge lengths alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedMesh, NonManifold, NonTriangleFace


class TriangleMesh:
    """Oriented manifold triangle mesh, possibly with boundary.

    Parameters
    ----------
    faces : (F, 3) int array
        Vertex indices per face, consistently wound (counter-clockwise).
    positions : (V, 3) float array, optional
        Embedded coordinates. Purely payload; may be None.
    n_vertices : int, optional
        Vertex count override for meshes with unreferenced vertices.

    Raises
    ------
    NonTriangleFace
        Face with repeated vertices or wrong arity.
    NonManifold
        Duplicate directed edge (inconsistent winding or >2 faces/edge),
        or a vertex whose star is not a single fan.
    DisconnectedMesh
        More than one connected component.
    """

    def __init__(self, faces, positions=None, n_vertices=None):
        faces = np.asarray(faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise NonTriangleFace("faces must be an (F, 3) index array")
        if faces.shape[0] == 0:
            raise NonTriangleFace("mesh has no faces")
        if (faces[:, 0] == faces[:, 1]).any() or (faces[:, 1] == faces[:, 2]).any() \
                or (faces[:, 2] == faces[:, 0]).any():
            raise NonTriangleFace("face with a repeated vertex")
        if faces.min() < 0:
            raise NonTriangleFace("negative vertex index")

        V = int(faces.max()) + 1
        if n_vertices is not None:
            if n_vertices < V:
                raise NonTriangleFace("n_vertices smaller than max face index")
            V = int(n_vertices)
        F = faces.shape[0]

        self.faces = faces
        self.n_vertices = V
        self.n_faces = F
        if positions is not None:
            positions = np.asarray(positions, dtype=np.float64)
            if positions.shape != (V, 3):
                raise NonTriangleFace("positions must be (V, 3)")
        self.positions = positions

        self._build_halfedges()
        self._check_vertex_fans()
        self._check_connected()

    # -- construction -------------------------------------------------------

    def _build_halfedges(self):
        F = self.n_faces
        n_int = 3 * F
        origin = np.empty(n_int, dtype=np.int64)
        origin[0::3] = self.faces[:, 0]
        origin[1::3] = self.faces[:, 1]
        origin[2::3] = self.faces[:, 2]
        dest = np.empty(n_int, dtype=np.int64)
        dest[0::3] = self.faces[:, 1]
        dest[1::3] = self.faces[:, 2]
        dest[2::3] = self.faces[:, 0]

        directed = {}
        for h in range(n_int):
            key = (int(origin[h]), int(dest[h]))
            if key in directed:
                raise NonManifold(
                    f"directed edge {key} appears twice: inconsistent winding "
                    "or more than two faces on an edge")
            directed[key] = h

        twin = np.full(n_int, -1, dtype=np.int64)
        for (a, b), h in directed.items():
            opp = directed.get((b, a))
            if opp is not None:
                twin[h] = opp

        # boundary halfedges for every unmatched interior halfedge
        unmatched = [h for h in range(n_int) if twin[h] < 0]
        n_bnd = len(unmatched)
        H = n_int + n_bnd
        self.he_origin = np.concatenate([origin, np.empty(n_bnd, dtype=np.int64)])
        self.he_twin = np.concatenate([twin, np.empty(n_bnd, dtype=np.int64)])
        self.he_face = np.concatenate(
            [np.repeat(np.arange(F, dtype=np.int64), 3), np.full(n_bnd, -1, dtype=np.int64)])
        self.he_next = np.empty(H, dtype=np.int64)
        nxt = np.arange(n_int, dtype=np.int64) + 1
        nxt[2::3] -= 3
        self.he_next[:n_int] = nxt

        bnd_from = {}
        for i, h in enumerate(unmatched):
            b = n_int + i
            self.he_origin[b] = dest[h]
            self.he_twin[b] = h
            self.he_twin[h] = b
            v = int(dest[h])
            if v in bnd_from:
                raise NonManifold(f"vertex {v} has two boundary fans (pinched vertex)")
            bnd_from[v] = b
        for i, h in enumerate(unmatched):
            b = n_int + i
            nxt_b = bnd_from.get(int(origin[h]))
            if nxt_b is None:
                raise NonManifold("boundary chain broken")
            self.he_next[b] = nxt_b

        self.n_halfedges = H
        self.n_interior_halfedges = n_int

        # canonical edge ids: one per twin pair, interior halfedge preferred
        edge_of = np.full(H, -1, dtype=np.int64)
        edge_he = []
        for h in range(H):
            if edge_of[h] >= 0:
                continue
            t = int(self.he_twin[h])
            e = len(edge_he)
            edge_of[h] = e
            edge_of[t] = e
            edge_he.append(h if self.he_face[h] >= 0 else t)
        self.he_edge = edge_of
        self.edge_he = np.asarray(edge_he, dtype=np.int64)
        self.n_edges = len(edge_he)

        self.vertex_he = np.full(self.n_vertices, -1, dtype=np.int64)
        for h in range(n_int):
            if self.vertex_he[origin[h]] < 0:
                self.vertex_he[origin[h]] = h
        # boundary vertices point at their outgoing boundary halfedge
        for v, b in bnd_from.items():
            self.vertex_he[v] = b
        if (self.vertex_he < 0).any():
            raise NonManifold("isolated vertex (no incident face)")

        self.is_boundary_vertex = np.zeros(self.n_vertices, dtype=bool)
        if n_bnd:
            self.is_boundary_vertex[self.he_origin[n_int:]] = True
        self.is_boundary_edge = self.he_face[self.he_twin[self.edge_he]] < 0

    def _check_vertex_fans(self):
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        np.add.at(deg, self.he_origin, 1)
        for v in range(self.n_vertices):
            h0 = int(self.vertex_he[v])
            h = h0
            seen = 0
            while True:
                seen += 1
                if seen > deg[v]:
                    raise NonManifold(f"vertex {v} star walk does not close")
                h = int(self.he_twin[self.prev_halfedge(h)])
                if h == h0:
                    break
            if seen != deg[v]:
                raise NonManifold(f"vertex {v} has a non-disk star")

    def _check_connected(self):
        seen = np.zeros(self.n_faces, dtype=bool)
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            f = stack.pop()
            for h in (3 * f, 3 * f + 1, 3 * f + 2):
                g = self.he_face[self.he_twin[h]]
                if g >= 0 and not seen[g]:
                    seen[g] = True
                    count += 1
                    stack.append(g)
        if count != self.n_faces:
            raise DisconnectedMesh(
                f"{self.n_faces - count} faces unreachable from face 0")

    # -- elementary queries --------------------------------------------------

    def prev_halfedge(self, h):
        if h < self.n_interior_halfedges:
            return h - 1 if h % 3 else h + 2
        # boundary halfedge: rotate clockwise around its origin until the
        # incoming boundary halfedge appears; that one precedes h on the loop
        x = self.he_next[self.he_twin[h]]
        while self.he_face[self.he_twin[x]] >= 0:
            x = self.he_next[self.he_twin[x]]
        return int(self.he_twin[x])

    def halfedge_dest(self, h):
        return int(self.he_origin[self.he_next[h]])

    def edge_endpoints(self, e):
        h = self.edge_he[e]
        return int(self.he_origin[h]), self.halfedge_dest(h)

    def edge_endpoint_arrays(self):
        """(a, b) index arrays over all edges. Recomputed on each call
        because intrinsic flips reassign endpoints in place."""
        h = self.edge_he
        return self.he_origin[h], self.he_origin[self.he_next[h]]

    def face_halfedges(self, f):
        return (3 * f, 3 * f + 1, 3 * f + 2)

    def face_edges(self, f):
        return self.he_edge[[3 * f, 3 * f + 1, 3 * f + 2]]

    def halfedge_between(self, a, b):
        """Halfedge from vertex a to vertex b (interior or boundary), or -1."""
        h0 = int(self.vertex_he[a])
        h = h0
        while True:
            if self.halfedge_dest(h) == b:
                return h
            h = int(self.he_twin[self.prev_halfedge(h)])
            if h == h0:
                return -1

    def edge_between(self, a, b):
        h = self.halfedge_between(a, b)
        return int(self.he_edge[h]) if h >= 0 else -1

    def vertex_outgoing(self, v):
        """Outgoing halfedges around v, counter-clockwise. For boundary
        vertices the walk starts at the outgoing boundary halfedge."""
        h0 = int(self.vertex_he[v])
        out = [h0]
        h = int(self.he_twin[self.prev_halfedge(h0)])
        while h != h0:
            out.append(h)
            h = int(self.he_twin[self.prev_halfedge(h)])
        return out

    def vertex_faces(self, v):
        return [int(self.he_face[h]) for h in self.vertex_outgoing(v)
                if self.he_face[h] >= 0]

    def boundary_loops(self):
        """Ordered vertex cycles, one per boundary loop, each rotated to start
        at its smallest vertex id; loops sorted by that id."""
        n_int = self.n_interior_halfedges
        visited = np.zeros(self.n_halfedges - n_int, dtype=bool)
        loops = []
        for b in range(n_int, self.n_halfedges):
            if visited[b - n_int]:
                continue
            cyc = []
            h = b
            while not visited[h - n_int]:
                visited[h - n_int] = True
                cyc.append(int(self.he_origin[h]))
                h = int(self.he_next[h])
            k = cyc.index(min(cyc))
            loops.append(cyc[k:] + cyc[:k])
        loops.sort(key=lambda c: c[0])
        return loops

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def copy(self):
        m = object.__new__(TriangleMesh)
        m.faces = self.faces.copy()
        m.n_vertices = self.n_vertices
        m.n_faces = self.n_faces
        m.positions = None if self.positions is None else self.positions.copy()
        for name in ("he_origin", "he_twin", "he_face", "he_next", "he_edge",
                     "edge_he", "vertex_he", "is_boundary_vertex", "is_boundary_edge"):
            setattr(m, name, getattr(self, name).copy())
        m.n_halfedges = self.n_halfedges
        m.n_interior_halfedges = self.n_interior_halfedges
        m.n_edges = self.n_edges
        return m


@dataclass
class TopologyReport:
    n_vertices: int
    n_edges: int
    n_faces: int
    euler_characteristic: int
    n_boundary_loops: int
    genus: int
    boundary_loops: list = field(default_factory=list)
    orientable: bool = True

    def to_dict(self):
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "eulerCharacteristic": self.euler_characteristic,
            "boundaryLoops": self.n_boundary_loops,
            "genus": self.genus,
            "orientable": self.orientable,
            "loops": [list(map(int, loop)) for loop in self.boundary_loops],
        }


def topology_report(mesh: TriangleMesh) -> TopologyReport:
    """V/E/F counts, Euler characteristic, genus and ordered boundary loops.

    Genus follows from chi = 2 - 2g - b. Construction already guarantees an
    oriented manifold, so orientable is always True here.
    """
    loops = mesh.boundary_loops()
    chi = mesh.euler_characteristic
    b = len(loops)
    genus = (2 - b - chi) // 2
    return TopologyReport(
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_faces=mesh.n_faces,
        euler_characteristic=chi,
        n_boundary_loops=b,
        genus=genus,
        boundary_loops=loops,
    )
