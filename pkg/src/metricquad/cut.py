"""Cut graphs and slicing the surface open into a disk.

The cut locus is a set of interior edges whose complement is a topological
disk. It comes from the complement of a dual spanning tree (faces glued
along tree edges always form a disk), pruned so that only chains anchored
at singular vertices or at the mesh boundary survive. Cone vertices must
end up on the cut, otherwise the flat metric cannot immerse; interior
vertices always touch the unpruned complement because a dual tree cannot
cross every edge of a closed fan without closing a cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .errors import InvalidCut
from .mesh import TriangleMesh
from .metric import ConeMetric
from .prescription import SingularityPrescription


@dataclass
class CutGraph:
    edges: list
    joined_paths: int = 0

    def __contains__(self, e):
        return e in self._edge_set

    def __post_init__(self):
        self.edges = sorted(int(e) for e in self.edges)
        self._edge_set = set(self.edges)

    def degree_array(self, mesh: TriangleMesh) -> np.ndarray:
        deg = np.zeros(mesh.n_vertices, dtype=int)
        for e in self.edges:
            a, b = mesh.edge_endpoints(e)
            deg[a] += 1
            deg[b] += 1
        return deg

    def to_dict(self):
        return {"edges": list(self.edges), "joinedPaths": self.joined_paths}


def _dual_tree_crossed_edges(mesh: TriangleMesh) -> np.ndarray:
    """Interior edges crossed by a breadth-first dual spanning tree.

    Deterministic: faces leave the queue in breadth order from face 0 and
    each face offers its edges ascending, so reruns give identical trees.
    """
    crossed = np.zeros(mesh.n_edges, dtype=bool)
    seen = np.zeros(mesh.n_faces, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for e in sorted(int(mesh.he_edge[h]) for h in (3 * f, 3 * f + 1, 3 * f + 2)):
            h = mesh.edge_he[e]
            t = mesh.he_twin[h]
            if mesh.he_face[t] < 0:
                continue
            g = int(mesh.he_face[t]) if mesh.he_face[h] == f else int(mesh.he_face[h])
            if not seen[g]:
                seen[g] = True
                crossed[e] = True
                queue.append(g)
    if not seen.all():
        raise InvalidCut("dual graph is disconnected")
    return crossed


def build_cut_graph(mesh: TriangleMesh, metric: ConeMetric,
                    prescription: SingularityPrescription) -> CutGraph:
    """Interior edges not crossed by the dual tree, pruned to anchors.

    Anchors are interior singular vertices and all boundary vertices;
    leaf chains ending anywhere else zip shut when sliced, so they go.
    Should pruning ever strand a singular vertex off the cut (it cannot,
    the pruning rule protects it, but user-supplied prescriptions on
    exotic meshes get a second chance), a shortest path joins it back.
    """
    singular = {v for v, k in prescription if k != 0 and not mesh.is_boundary_vertex[v]}
    crossed = _dual_tree_crossed_edges(mesh)
    interior = np.array([mesh.he_face[mesh.he_twin[mesh.edge_he[e]]] >= 0
                         for e in range(mesh.n_edges)])
    in_cut = interior & ~crossed

    ends = mesh.edge_endpoint_arrays()
    deg = np.zeros(mesh.n_vertices, dtype=int)
    for e in np.nonzero(in_cut)[0]:
        deg[ends[0][e]] += 1
        deg[ends[1][e]] += 1

    vertex_edges = [[] for _ in range(mesh.n_vertices)]
    for e in np.nonzero(in_cut)[0]:
        vertex_edges[ends[0][e]].append(int(e))
        vertex_edges[ends[1][e]].append(int(e))

    def prunable(v):
        return (deg[v] == 1 and v not in singular
                and not mesh.is_boundary_vertex[v])

    queue = deque(v for v in range(mesh.n_vertices) if prunable(v))
    while queue:
        v = queue.popleft()
        if not prunable(v):
            continue
        e = next(ee for ee in vertex_edges[v] if in_cut[ee])
        in_cut[e] = False
        a, b = int(ends[0][e]), int(ends[1][e])
        deg[a] -= 1
        deg[b] -= 1
        other = b if a == v else a
        if prunable(other):
            queue.append(other)

    joined = 0
    stranded = [v for v in sorted(singular) if deg[v] == 0]
    if stranded:
        n = mesh.n_vertices
        a, b = ends
        w = np.concatenate([metric.lengths, metric.lengths])
        graph = sp.coo_matrix((w, (np.concatenate([a, b]), np.concatenate([b, a]))),
                              shape=(n, n)).tocsr()
        for v in stranded:
            if deg[v] > 0:
                continue
            dist, pred = _dijkstra(graph, indices=v, return_predecessors=True)
            targets = np.nonzero((deg > 0) | mesh.is_boundary_vertex)[0]
            targets = targets[targets != v]
            if targets.size == 0:
                raise InvalidCut(f"no anchor reachable from singular vertex {v}")
            t = int(targets[np.argmin(dist[targets])])
            if not np.isfinite(dist[t]):
                raise InvalidCut(f"singular vertex {v} is disconnected from the cut")
            x = t
            while x != v:
                p = int(pred[x])
                e = mesh.edge_between(p, x)
                if not in_cut[e]:
                    in_cut[e] = True
                    deg[p] += 1
                    deg[x] += 1
                x = p
            joined += 1

    return CutGraph(edges=np.nonzero(in_cut)[0].tolist(), joined_paths=joined)


@dataclass
class SlicedMesh:
    """The surface cut open along a cut graph, always a disk.

    Faces keep their ids and slot layout, so an interior halfedge index
    means the same corner in both meshes. vertex_origin maps new vertex
    ids back; cut_halfedge_pairs lists, per cut edge, the two halfedges
    that used to be twins and now run along the new boundary.
    """

    mesh: TriangleMesh
    metric: ConeMetric
    vertex_origin: np.ndarray
    cut: CutGraph
    original: TriangleMesh = None
    cut_halfedge_pairs: list = field(default_factory=list)

    def copies_of(self, v: int) -> np.ndarray:
        return np.nonzero(self.vertex_origin == v)[0]


def slice_along(mesh: TriangleMesh, metric: ConeMetric, cut: CutGraph) -> SlicedMesh:
    """Cut the surface open along cut; validates that a disk comes out.

    Corners around a vertex are grouped into sectors: two corners merge
    when the edge between their faces is interior and not cut. Each sector
    becomes one vertex of the sliced mesh.
    """
    n_int = mesh.n_interior_halfedges
    parent = np.arange(n_int)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for h in range(n_int):
        t = mesh.he_twin[h]
        if mesh.he_face[t] < 0 or mesh.he_edge[h] in cut:
            continue
        # corner at origin(h) on the far side of edge h is next(twin(h))
        a, b = find(h), find(int(mesh.he_next[t]))
        if a != b:
            parent[a] = b

    roots = {}
    new_id = np.empty(n_int, dtype=int)
    origin = []
    order = sorted(range(n_int), key=lambda h: (int(mesh.he_origin[h]), h))
    for h in order:
        r = find(h)
        if r not in roots:
            roots[r] = len(origin)
            origin.append(int(mesh.he_origin[h]))
        new_id[h] = roots[r]

    vertex_origin = np.array(origin, dtype=int)
    new_faces = new_id.reshape(-1, 3)
    positions = None if mesh.positions is None else mesh.positions[vertex_origin]
    sliced = TriangleMesh(new_faces, positions)

    if sliced.euler_characteristic != 1 or len(sliced.boundary_loops()) != 1:
        raise InvalidCut(
            f"complement is not a disk: chi = {sliced.euler_characteristic}, "
            f"{len(sliced.boundary_loops())} boundary loops")

    lengths = np.empty(sliced.n_edges)
    for h in range(n_int):
        lengths[sliced.he_edge[h]] = metric.lengths[mesh.he_edge[h]]
    new_metric = ConeMetric(sliced, lengths)

    pairs = []
    for e in cut.edges:
        h = int(mesh.edge_he[e])
        pairs.append((h, int(mesh.he_twin[h])))

    return SlicedMesh(mesh=sliced, metric=new_metric, vertex_origin=vertex_origin,
                      cut=cut, original=mesh, cut_halfedge_pairs=pairs)
