"""Developing a flat disk into the plane, and seam transforms.

A sliced surface whose interior vertices all have zero angle defect
unrolls face by face into the plane; the result is an immersion (local
injectivity only, global overlaps are expected and fine). Vertices get a
single planar position each: interior vertices are flat so every face
path assigns the same position up to roundoff, and boundary vertices have
one sector only.

Each cut segment (maximal cut chain between nodes) appears twice on the
disk boundary, and the isometry matching the two copies is a single rigid
motion because chain-interior vertices are flat; it is recovered by a
two-point-cloud fit in complex arithmetic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSegment, ImmersionError, InvalidCut, NotFlat
from .metric import ConeMetric, corner_angles, vertex_curvature
from .cut import SlicedMesh


@dataclass
class Immersion:
    metric: ConeMetric
    z: np.ndarray  # complex, one position per vertex

    @property
    def mesh(self):
        return self.metric.mesh

    def cartesian(self) -> np.ndarray:
        return np.column_stack([self.z.real, self.z.imag])

    @property
    def bbox_diag(self) -> float:
        xy = self.cartesian()
        return float(np.linalg.norm(xy.max(axis=0) - xy.min(axis=0)))


def immerse(metric: ConeMetric, flat_tol: float = 1e-6,
            check_tol: float = 1e-9) -> Immersion:
    """Unroll a flat disk into the plane by breadth-first face traversal.

    The first face places its longest side on the positive x axis starting
    at the origin; every further face is attached across an already placed
    side, the third corner fixed by the interior angle at the shared side's
    origin (counter-clockwise, faces keep their winding). Raises NotFlat
    when an interior vertex has angle defect above flat_tol, and
    ImmersionError when a placed face fails to be congruent to its metric
    triangle within check_tol relative to its size (numerical drift).
    """
    mesh = metric.mesh
    if mesh.euler_characteristic != 1 or len(mesh.boundary_loops()) != 1:
        raise ImmersionError(
            f"can only immerse a disk: chi = {mesh.euler_characteristic}, "
            f"{len(mesh.boundary_loops())} boundary loops")
    angles = corner_angles(metric)
    K = vertex_curvature(metric, angles)
    interior = ~mesh.is_boundary_vertex
    if np.any(np.abs(K[interior]) > flat_tol):
        worst = int(np.argmax(np.where(interior, np.abs(K), 0.0)))
        raise NotFlat(
            f"interior vertex {worst} has angle defect {K[worst]:.3e}, "
            f"above {flat_tol:.1e}; run the flow first")

    he_len = metric.halfedge_lengths()
    z = np.full(mesh.n_vertices, np.nan + 0j, dtype=complex)

    # Seed face 0 with its longest side on the positive x axis.
    s0 = int(np.argmax(he_len[0:3]))
    a, b = int(mesh.he_origin[s0]), mesh.halfedge_dest(s0)
    z[a] = 0.0 + 0.0j
    z[b] = he_len[s0] + 0.0j
    _place_third(mesh, he_len, angles, z, s0)

    placed = np.zeros(mesh.n_faces, dtype=bool)
    placed[0] = True
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for h in (3 * f, 3 * f + 1, 3 * f + 2):
            t = int(mesh.he_twin[h])
            g = int(mesh.he_face[t])
            if g < 0 or placed[g]:
                continue
            _place_third(mesh, he_len, angles, z, t)
            placed[g] = True
            queue.append(g)

    if np.isnan(z).any():
        raise ImmersionError("unreached vertices during development")

    # Per-face congruence audit against the metric.
    he = np.arange(mesh.n_interior_halfedges)
    got = np.abs(z[mesh.he_origin[mesh.he_next[he]]] - z[mesh.he_origin[he]])
    err = np.abs(got - he_len) / (1.0 + he_len)
    if err.max() > check_tol:
        h = int(np.argmax(err))
        raise ImmersionError(
            f"face {h // 3} drifted: side error {err.max():.3e} above {check_tol:.1e}")

    return Immersion(metric=metric, z=z)


def _place_third(mesh, he_len, angles, z, h):
    """Given halfedge h with both endpoints placed, place the third corner
    of its face: rotate the side direction by the angle at origin(h)."""
    nxt = int(mesh.he_next[h])
    prv = int(mesh.he_next[nxt])
    q = int(mesh.he_origin[h])
    r = int(mesh.he_origin[prv])
    if not np.isnan(z[r].real):
        return
    p = mesh.halfedge_dest(h)
    theta = angles[nxt]  # corner at origin(h) is opposite next(h)
    d = z[p] - z[q]
    d /= abs(d)
    z[r] = z[q] + he_len[prv] * d * np.exp(1j * theta)


@dataclass
class SegmentPairing:
    """One cut segment and the rigid motion matching its two copies.

    The motion maps the plus copy onto the minus copy:
    z_minus = exp(i*rotation) * z_plus + translation.
    """

    segment: int
    edges: list
    vertices: list           # original vertex ids v_0..v_k along the chain
    plus_vertices: list      # sliced ids of the copies on the two sides
    minus_vertices: list
    plus_halfedges: list     # sliced interior halfedges running along plus
    rotation: float
    translation: complex
    residual: float
    closed: bool = False

    def to_dict(self):
        return {
            "segment": self.segment,
            "edges": list(map(int, self.edges)),
            "vertices": list(map(int, self.vertices)),
            "plusVertices": list(map(int, self.plus_vertices)),
            "minusVertices": list(map(int, self.minus_vertices)),
            "rotation": self.rotation,
            "translation": [self.translation.real, self.translation.imag],
            "residual": self.residual,
            "closed": self.closed,
        }


def _cut_chains(mesh, cut, singular):
    """Split the cut graph into maximal chains between nodes.

    Nodes are singular vertices, boundary vertices, and cut vertices of
    degree other than two. Chains are returned as ordered original vertex
    lists; closed flat cycles with no node on them become one chain with
    equal first and last vertex.
    """
    adj = {}
    for e in cut.edges:
        a, b = mesh.edge_endpoints(e)
        adj.setdefault(a, []).append((b, e))
        adj.setdefault(b, []).append((a, e))
    for v in adj:
        adj[v].sort()
    deg = {v: len(nb) for v, nb in adj.items()}

    def is_node(v):
        return deg[v] != 2 or v in singular or mesh.is_boundary_vertex[v]

    chains = []
    used = set()
    for v0 in sorted(adj):
        if not is_node(v0):
            continue
        for v1, e0 in adj[v0]:
            if e0 in used:
                continue
            used.add(e0)
            verts, edges = [v0, v1], [e0]
            cur = v1
            while not is_node(cur):
                (n1, e1), (n2, e2) = adj[cur][0], adj[cur][1]
                nxt, en = (n2, e2) if e1 in used else (n1, e1)
                if en in used:
                    break
                used.add(en)
                verts.append(nxt)
                edges.append(en)
                cur = nxt
            chains.append((verts, edges))
    # leftover pure cycles (every vertex degree 2, none a node)
    for v0 in sorted(adj):
        for v1, e0 in adj[v0]:
            if e0 in used:
                continue
            used.add(e0)
            verts, edges = [v0, v1], [e0]
            cur = v1
            while cur != v0:
                (n1, e1), (n2, e2) = adj[cur][0], adj[cur][1]
                nxt, en = (n2, e2) if e1 in used else (n1, e1)
                used.add(en)
                verts.append(nxt)
                edges.append(en)
                cur = nxt
            chains.append((verts, edges))
    return chains


def segment_pairings(immersion: Immersion, sliced: SlicedMesh,
                     prescription=None) -> list:
    """Rigid motions identifying the two boundary copies of each segment.

    Matched point lists come from walking the chain on both sides through
    the sliced mesh; the rotation comes from the complex cross-correlation
    of the centered copies and the translation from the centroids. The
    residual is reported but not thresholded here.
    """
    orig = sliced.original
    if orig is None:
        raise InvalidCut("sliced mesh lost its original; use slice_along")
    singular = set()
    if prescription is not None:
        singular = {v for v, k in prescription if k != 0}
    chains = _cut_chains(orig, sliced.cut, singular)

    z = immersion.z
    m = sliced.mesh
    out = []
    for idx, (verts, edges) in enumerate(chains):
        hs = []
        for vv, ee in zip(verts, edges):
            h = orig.edge_he[ee]
            if int(orig.he_origin[h]) != vv:
                h = orig.he_twin[h]
            hs.append(int(h))
        plus, minus = [], []
        for i, h in enumerate(hs):
            t = int(orig.he_twin[h])
            plus.append(int(m.he_origin[h]))
            minus.append(m.halfedge_dest(t))
            if i == len(hs) - 1:
                plus.append(m.halfedge_dest(h))
                minus.append(int(m.he_origin[t]))
        for i in range(len(hs) - 1):
            t_i, t_n = int(orig.he_twin[hs[i]]), int(orig.he_twin[hs[i + 1]])
            if int(m.he_origin[t_i]) != m.halfedge_dest(t_n):
                raise InvalidCut(
                    f"segment {idx}: minus side is not a contiguous boundary run")

        P, Q = z[plus], z[minus]
        cp, cq = P.mean(), Q.mean()
        scale = immersion.bbox_diag
        if np.sum(np.abs(P - cp) ** 2) < (1e-12 * scale) ** 2 * len(P):
            raise DegenerateSegment(
                f"segment {idx} has no spatial extent, rotation is undefined")
        corr = np.sum((Q - cq) * np.conj(P - cp))
        theta = float(np.angle(corr))
        rot = np.exp(1j * theta)
        trans = cq - rot * cp
        residual = float(np.max(np.abs(rot * P + trans - Q)))
        out.append(SegmentPairing(
            segment=idx, edges=edges, vertices=verts,
            plus_vertices=plus, minus_vertices=minus, plus_halfedges=hs,
            rotation=theta, translation=complex(trans), residual=residual,
            closed=verts[0] == verts[-1]))
    return out
