"""Quantized subdivision of the skeleton into the final quad mesh.

Each arc gets an integer segment count near length/h; opposite sides of a
patch must agree, so mismatches are repaired by unit steps chosen by
smallest relative length error until a fixed point. Every patch is then
filled with a tensor grid: side points subdivide the arcs (shared between
neighbouring patches, which makes the grid conform), interior points are
found by shooting perpendicular geodesics from the bottom side. All
vertices carry barycentric anchors on the input surface and are pulled
back to 3D through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (NonQuadFace, QuantizationInfeasible, QuantizeError,
                     TooCoarse, TraceError)
from .skeleton import Skeleton
from .tracing import _Tracer, chart_barycentric


@dataclass
class QuadMesh:
    positions: np.ndarray        # (V, 3)
    quads: np.ndarray            # (Q, 4) CCW
    anchors: list                # per vertex (face, bary[3]) on the source mesh
    singular_vertices: list      # vertices sitting at skeleton cones
    node_of_vertex: dict         # vertex -> skeleton node id (nodes only)

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_quads(self):
        return len(self.quads)

    def edges(self):
        """Unique undirected edges as a sorted (E, 2) array."""
        q = self.quads
        e = np.concatenate([q[:, [0, 1]], q[:, [1, 2]],
                            q[:, [2, 3]], q[:, [3, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def quad_count_per_vertex(self):
        out = np.zeros(self.n_vertices, dtype=int)
        np.add.at(out, self.quads.reshape(-1), 1)
        return out

    def boundary_vertex_mask(self):
        q = self.quads
        directed = {}
        for face in q:
            for a, b in zip(face, np.roll(face, -1)):
                directed[(int(a), int(b))] = directed.get((int(a), int(b)), 0) + 1
        mask = np.zeros(self.n_vertices, dtype=bool)
        for (a, b), cnt in directed.items():
            if cnt != 1:
                raise QuantizeError(f"directed edge {a}->{b} repeats; not manifold")
            if (b, a) not in directed:
                mask[a] = True
                mask[b] = True
        return mask

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_quads

    def valences(self):
        """Incident edge count per vertex."""
        e = self.edges()
        out = np.zeros(self.n_vertices, dtype=int)
        np.add.at(out, e.reshape(-1), 1)
        return out

    def to_dict(self):
        return {"positions": [[float(x) for x in p] for p in self.positions],
                "quads": [[int(i) for i in f] for f in self.quads],
                "anchors": [[int(f), [float(x) for x in b]]
                            for f, b in self.anchors],
                "singularVertices": [int(v) for v in self.singular_vertices],
                "eulerCharacteristic": int(self.euler_characteristic())}


@dataclass
class QualityReport:
    census: dict                 # quad-count valence -> #vertices, irregular only
    max_angle_deviation: float   # radians, from pi/2, over all quad corners
    edge_length_cv: float
    index_sum: int
    n_quads: int
    n_vertices: int

    def to_dict(self):
        return {"census": {str(k): int(v) for k, v in sorted(self.census.items())},
                "maxAngleDeviation": float(self.max_angle_deviation),
                "edgeLengthCV": float(self.edge_length_cv),
                "indexSum": int(self.index_sum),
                "nQuads": int(self.n_quads),
                "nVertices": int(self.n_vertices)}


def quantize_counts(skeleton: Skeleton, h: float) -> dict:
    """Integer segment count per arc.

    Counts start at max(1, round(length/h)); while some patch has unequal
    opposite sides, one count moves by one unit, choosing the candidate
    whose new count has the smallest relative length error. Capped at
    10 * #arcs repairs.
    """
    if h <= 0:
        raise ValueError("target edge length must be positive")
    arcs = skeleton.arcs
    min_len = min(a.length for a in arcs)
    if min_len < 0.5 * h:
        raise TooCoarse(
            f"target edge length {h:.6g} exceeds twice the shortest arc "
            f"({min_len:.6g}); choose h <= {2.0 * min_len:.6g}")
    counts = {a.ident: max(1, int(np.floor(a.length / h + 0.5))) for a in arcs}

    pairs = []
    for p in skeleton.patches:
        a0, a1, a2, a3 = (d[0] for d in p.darts)
        pairs.append((a0, a2))
        pairs.append((a1, a3))

    def rel_err(arc_id, n):
        return abs(n * h - arcs[arc_id].length) / arcs[arc_id].length

    budget = 10 * len(arcs)
    for _ in range(budget + 1):
        bad = next(((a, b) for a, b in pairs if counts[a] != counts[b]), None)
        if bad is None:
            return counts
        a, b = bad
        if counts[a] > counts[b]:
            a, b = b, a
        # counts[a] < counts[b]: either grow a or shrink b by one
        cands = [(rel_err(a, counts[a] + 1), a, counts[a] + 1)]
        if counts[b] - 1 >= 1:
            cands.append((rel_err(b, counts[b] - 1), b, counts[b] - 1))
        _, arc_id, n = min(cands)
        counts[arc_id] = n
    raise QuantizationInfeasible(
        f"opposite-side reconciliation did not settle within {budget} repairs")


class _ArcWalk:
    """Geometry of an arc traversed in a given direction (+1 tail->head)."""

    def __init__(self, arc, direction):
        if direction > 0:
            self.steps = list(arc.steps)
        else:
            self.steps = [type(s)(s.face, s.b, s.a) for s in reversed(arc.steps)]
        self.cum = np.concatenate([[0.0],
                                   np.cumsum([s.length for s in self.steps])])
        self.length = float(self.cum[-1])

    def at(self, s):
        """(face, chart point, walk direction angle) at arclength s."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        i = min(max(i, 0), len(self.steps) - 1)
        st = self.steps[i]
        t = 0.0 if st.length == 0 else (s - self.cum[i]) / st.length
        return st.face, st.a + t * (st.b - st.a), float(np.angle(st.b - st.a))


def _points_along(steps, targets):
    """Chart points at the given arclengths along a step sequence."""
    out = []
    cum = 0.0
    ti = 0
    for s in steps:
        L = s.length
        while ti < len(targets) and targets[ti] <= cum + L + 1e-12 * (1.0 + L):
            t = 0.0 if L == 0 else min(max((targets[ti] - cum) / L, 0.0), 1.0)
            out.append((s.face, s.a + t * (s.b - s.a)))
            ti += 1
        cum += L
    if ti < len(targets):
        raise QuantizeError(
            f"interior grid geodesic fell short: reached {cum:.9g} of "
            f"{targets[-1]:.9g}")
    return out


def _charts_of(tracer, f, p, ang):
    """(face, point, angle) for every chart containing p.

    An arc step that runs along a mesh edge puts p on that edge, and the
    perpendicular can point into the twin face; yield it too so the
    column trace can start in whichever chart holds the direction.
    """
    yield f, p, ang
    mesh = tracer.mesh
    A = tracer.corners[f]
    for j in range(3):
        a, b = A[j], A[(j + 1) % 3]
        w = b - a
        L = abs(w)
        if L <= 0.0 or abs(np.imag(np.conj(w) * (p - a))) / L > 1e-9 * L:
            continue
        t = int(mesh.he_twin[3 * f + j])
        if mesh.he_face[t] < 0:
            continue
        R, tr = tracer.transition(3 * f + j)
        yield t // 3, R * p + tr, ang + float(np.angle(R))


def _run_column(tracer, walk, s0, max_length):
    """Trace one interior grid column perpendicular to its base walk.

    A column whose base parameter lands on a mesh vertex starts outside
    any face wedge, and one aligned with a chain of mesh edges threads
    every vertex on the chain; both derail the tracer. Sliding the base
    point or rotating the ray by 1e-9 displaces the column by well under
    any target spacing, and column vertices are private to their patch,
    so grid conformity is unaffected.
    """
    last = None
    for ds in (0.0, 1e-9 * walk.length, -1e-9 * walk.length):
        f, p, ang = walk.at(s0 + ds)
        for nudge in (0.0, 1e-9, -1e-9, 1e-8, -1e-8):
            for cf, cp, cang in _charts_of(tracer, f, p, ang):
                try:
                    return tracer.run(cf, cp, cang + 0.5 * np.pi + nudge,
                                      max_length, 0.0)
                except TraceError as e:
                    last = e
    raise last


def quantize_and_subdivide(skeleton: Skeleton, h: float) -> QuadMesh:
    """Fill every skeleton patch with a conforming tensor-product grid."""
    counts = quantize_counts(skeleton, h)
    metric = skeleton.metric
    mesh = metric.mesh
    tracer = _Tracer(metric, [])

    positions = []
    anchors = []
    ids = {}

    def _anchor(face, point):
        bary = chart_barycentric(tracer.corners[face], point)
        bary = np.clip(bary, 0.0, 1.0)
        bary = bary / bary.sum()
        return int(face), bary

    def vertex_id(key, face, point):
        vid = ids.get(key)
        if vid is not None:
            return vid
        vid = len(positions)
        f, bary = _anchor(face, point)
        positions.append(bary @ mesh.positions[mesh.faces[f]])
        anchors.append((f, bary))
        ids[key] = vid
        return vid

    def side_vertex(dart, k, n, walk):
        """Vertex at walk index k of a dart whose arc has n segments."""
        arc_id, direction = dart
        if k == 0 or k == n:
            at_head = (k == n) == (direction > 0)
            node_id = skeleton.arcs[arc_id].head if at_head \
                else skeleton.arcs[arc_id].tail
            node = skeleton.nodes[node_id]
            return vertex_id(("node", node_id), node.face, node.point)
        idx = k if direction > 0 else n - k
        f, p, _ = walk.at(k * walk.length / n)
        return vertex_id(("arc", arc_id, idx), f, p)

    quads = []
    for patch in skeleton.patches:
        d_bottom, d_right, d_top, d_left = patch.darts
        n_u = counts[d_bottom[0]]
        n_v = counts[d_right[0]]
        if counts[d_top[0]] != n_u or counts[d_left[0]] != n_v:
            raise QuantizationInfeasible(
                f"patch {patch.ident} has unreconciled side counts")
        walks = [_ArcWalk(skeleton.arcs[a], d) for a, d in patch.darts]
        H = 0.5 * (walks[1].length + walks[3].length)

        grid = np.empty((n_u + 1, n_v + 1), dtype=int)
        for i in range(n_u + 1):
            grid[i, 0] = side_vertex(d_bottom, i, n_u, walks[0])
            # top dart walks right-to-left: lattice column i is walk index n_u-i
            grid[i, n_v] = side_vertex(d_top, n_u - i, n_u, walks[2])
        for j in range(n_v + 1):
            grid[n_u, j] = side_vertex(d_right, j, n_v, walks[1])
            # left dart walks top-to-bottom
            grid[0, j] = side_vertex(d_left, n_v - j, n_v, walks[3])

        if n_u > 1 and n_v > 1:
            targets = [j * H / n_v for j in range(1, n_v)]
            for i in range(1, n_u):
                tr = _run_column(tracer, walks[0],
                                 i * walks[0].length / n_u,
                                 targets[-1] * (1.0 + 1e-9) + 1e-12)
                pts = _points_along(tr.steps, targets)
                for j, (pf, pp) in enumerate(pts, start=1):
                    grid[i, j] = vertex_id(("int", patch.ident, i, j), pf, pp)

        for i in range(n_u):
            for j in range(n_v):
                quads.append([grid[i, j], grid[i + 1, j],
                              grid[i + 1, j + 1], grid[i, j + 1]])

    singular = []
    node_of_vertex = {}
    for key, vid in ids.items():
        if key[0] == "node":
            node_of_vertex[vid] = key[1]
            if skeleton.nodes[key[1]].kind == "cone":
                singular.append(vid)

    qm = QuadMesh(positions=np.asarray(positions, dtype=float),
                  quads=np.asarray(quads, dtype=int),
                  anchors=anchors,
                  singular_vertices=sorted(singular),
                  node_of_vertex=node_of_vertex)
    qm.boundary_vertex_mask()   # manifoldness gate
    chi_in = mesh.euler_characteristic
    chi_out = qm.euler_characteristic()
    if chi_out != chi_in:
        raise QuantizeError(
            f"quad mesh Euler characteristic {chi_out} != input {chi_in}")
    return qm


def quad_quality(qm: QuadMesh) -> QualityReport:
    """Census of irregular vertices, worst corner angle, edge length spread,
    and the integer index sum (4 - #quads interior, 2 - #quads boundary)."""
    if qm.quads.shape[1] != 4:
        raise NonQuadFace("faces are not quads")
    qcount = qm.quad_count_per_vertex()
    boundary = qm.boundary_vertex_mask()

    census = {}
    index_sum = 0
    for v in range(qm.n_vertices):
        q = int(qcount[v])
        if boundary[v]:
            index_sum += 2 - q
            if q != 2:
                census[q] = census.get(q, 0) + 1
        else:
            index_sum += 4 - q
            if q != 4:
                census[q] = census.get(q, 0) + 1

    P = qm.positions
    dev = 0.0
    for face in qm.quads:
        pts = P[face]
        for c in range(4):
            u = pts[(c + 1) % 4] - pts[c]
            w = pts[(c - 1) % 4] - pts[c]
            nu, nw = np.linalg.norm(u), np.linalg.norm(w)
            if nu == 0 or nw == 0:
                raise QuantizeError(f"degenerate quad corner at vertex {face[c]}")
            ang = np.arccos(np.clip(u @ w / (nu * nw), -1.0, 1.0))
            dev = max(dev, abs(ang - 0.5 * np.pi))

    e = qm.edges()
    lens = np.linalg.norm(P[e[:, 0]] - P[e[:, 1]], axis=1)
    cv = float(lens.std() / lens.mean()) if lens.size else 0.0

    return QualityReport(census=census,
                         max_angle_deviation=float(dev),
                         edge_length_cv=cv,
                         index_sum=int(index_sum),
                         n_quads=qm.n_quads,
                         n_vertices=qm.n_vertices)
