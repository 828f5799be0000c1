"""Patch skeleton: the arrangement of separatrices and boundary.

Nodes are cones, boundary feet, and transversal crossings; arcs are the
pieces of separatrix and boundary between nodes; patches are the faces of
the arrangement. On a metric with exact quarter holonomy every wedge
between consecutive arc ends at a node is a quarter turn, so every patch
is a metric rectangle: its boundary walk closes after four corners and
opposite sides have equal length. The walk uses each node's rotation
system (arc ends sorted by local angle) and keeps the patch on the left,
which on the mesh boundary means boundary arcs are walked along the
interior halfedge direction only.

Closed surfaces without singularities (flat torus) get two synthesized
closed leaves through the centroid of face 0; their crossing provides the
node the arrangement needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (NonRectangularPatch, OverlappingSeparatrices,
                     SkeletonError, TraceError)
from .holonomy import face_chart_corners, face_transition, wrap_angle
from .metric import ConeMetric, total_area
from .tracing import (STOP_RADIUS_FACTOR, TraceStep, _Tracer,
                      _point_segment_distance, chart_barycentric,
                      step_points_3d)

ANGLE_TOL = 1e-6
LENGTH_REL_TOL = 1e-6


@dataclass
class SkeletonNode:
    ident: int
    kind: str                  # "cone" | "foot" | "crossing"
    face: int
    point: complex             # chart coordinates in face
    vertex: int = -1           # mesh vertex for cones
    total_angle: float = 2.0 * np.pi
    anchor_he: int = -1        # feet: interior halfedge of the boundary edge
    on_boundary: bool = False
    position: np.ndarray = None
    ends: list = field(default_factory=list)   # (coord, dart), sorted later

    def to_dict(self):
        return {"id": self.ident, "kind": self.kind, "vertex": self.vertex,
                "face": self.face, "point": [self.point.real, self.point.imag],
                "position": None if self.position is None else
                [float(x) for x in self.position],
                "totalAngle": float(self.total_angle)}


@dataclass
class SkeletonArc:
    ident: int
    kind: str                  # "separatrix" | "boundary"
    tail: int
    head: int
    length: float
    steps: list                # TraceStep pieces, tail to head
    # direction of travel into the head in the last step's face chart; the
    # last recorded segment bends toward the cone it stops at, so its own
    # angle is unusable when that segment is short
    head_dir: float | None = None

    def to_dict(self):
        return {"id": self.ident, "kind": self.kind, "tail": self.tail,
                "head": self.head, "length": float(self.length),
                "steps": [{"face": s.face, "a": [s.a.real, s.a.imag],
                           "b": [s.b.real, s.b.imag]} for s in self.steps]}


@dataclass
class SkeletonPatch:
    ident: int
    darts: list                # 4 (arc id, +1|-1) in boundary walk order
    corners: list              # 4 node ids, in walk order after each dart
    side_lengths: list

    @property
    def width(self):
        return 0.5 * (self.side_lengths[0] + self.side_lengths[2])

    @property
    def height(self):
        return 0.5 * (self.side_lengths[1] + self.side_lengths[3])

    def to_dict(self):
        return {"id": self.ident,
                "darts": [[a, d] for a, d in self.darts],
                "corners": list(self.corners),
                "sideLengths": [float(x) for x in self.side_lengths]}


@dataclass
class Skeleton:
    metric: ConeMetric
    nodes: list
    arcs: list
    patches: list

    def euler_characteristic(self):
        return len(self.nodes) - len(self.arcs) + len(self.patches)

    def arc_polyline(self, arc) -> np.ndarray:
        """3D points along an arc, one per chart step plus the far end."""
        mesh = self.metric.mesh
        corners = face_chart_corners(self.metric)
        pts = [step_points_3d(mesh, corners, s, [0.0])[0] for s in arc.steps]
        pts.append(step_points_3d(mesh, corners, arc.steps[-1], [1.0])[0])
        return np.asarray(pts)

    def to_dict(self):
        polylines = [self.arc_polyline(a) for a in self.arcs]
        out = {"nodes": [n.to_dict() for n in self.nodes],
               "arcs": [a.to_dict() for a in self.arcs],
               "patches": [p.to_dict() for p in self.patches],
               "eulerCharacteristic": int(self.euler_characteristic())}
        for row, line in zip(out["arcs"], polylines):
            row["polyline"] = [[float(x) for x in p] for p in line]
        return out


class _NodeRegistry:
    """Nodes keyed by mesh vertex (cones) or by embedded position."""

    def __init__(self, mesh, corners, merge_radius):
        self.mesh = mesh
        self.corners = corners
        self.merge_radius = merge_radius
        self.nodes = []
        self.by_vertex = {}

    def _pos3d(self, face, point):
        bary = chart_barycentric(self.corners[face], point)
        return bary @ self.mesh.positions[self.mesh.faces[face]]

    def add(self, kind, face, point, vertex=-1, total_angle=2.0 * np.pi):
        if vertex >= 0 and vertex in self.by_vertex:
            return self.by_vertex[vertex]
        pos = self._pos3d(face, point)
        if vertex < 0:
            for n in self.nodes:
                if np.linalg.norm(n.position - pos) <= self.merge_radius:
                    return n
        n = SkeletonNode(ident=len(self.nodes), kind=kind, face=face,
                         point=complex(point), vertex=vertex,
                         total_angle=float(total_angle), position=pos)
        self.nodes.append(n)
        if vertex >= 0:
            self.by_vertex[vertex] = n
        return n


def _cone_fan(mesh, angles, v):
    """CCW fan around v as (spoke halfedge, cumulative angle, corner angle)
    plus the total wedge angle. For boundary vertices the fan starts at the
    spoke along the boundary and spans the interior wedge."""
    fan = []
    cum = 0.0
    for h in mesh.vertex_outgoing(v):
        if mesh.he_face[h] < 0:
            continue
        th = float(angles[int(mesh.he_next[h])])
        fan.append((int(h), cum, th))
        cum += th
    if not fan:
        raise SkeletonError(f"vertex {v} has no incident faces")
    return fan, cum


def _strand_offsets(steps):
    offs = []
    acc = 0.0
    for s in steps:
        offs.append(acc)
        acc += s.length
    return offs, acc


def _split_strand(steps, offsets, params):
    """Cut the step list at sorted arclength params into len(params)+1
    pieces; cuts landing on a step junction produce clean breaks."""
    pieces = []
    cur = []
    pi = 0
    for i, s in enumerate(steps):
        t0 = offsets[i]
        L = s.length
        a = s.a
        local0 = 0.0
        while pi < len(params) and (params[pi] <= t0 + L + 1e-15) and L > 0:
            t_loc = min(max((params[pi] - t0) / L, 0.0), 1.0)
            if t_loc > local0 + 1e-12:
                p = s.a + t_loc * (s.b - s.a)
                cur.append(TraceStep(s.face, a, p))
                a = p
            pieces.append(cur)
            cur = []
            local0 = max(local0, t_loc)
            pi += 1
        if local0 < 1.0 - 1e-12 and L > 0:
            cur.append(TraceStep(s.face, a, s.b, crossed=s.crossed))
    while pi < len(params):   # params at the very end
        pieces.append(cur)
        cur = []
        pi += 1
    pieces.append(cur)
    return pieces


def build_skeleton(metric: ConeMetric, field, separatrices, prescription,
                   stop_radius: float | None = None) -> Skeleton:
    """Assemble nodes, arcs, and rectangular patches from the separatrices.

    Validates every patch (four quarter-turn corners within 1e-6, opposite
    sides equal within 1e-6 relative) and the arrangement's Euler count
    against the surface. A trace that ends by proximity carries up to two
    stop radii of length error per cone end, so the side-equality check is
    widened to 4 stop radii absolute; pass the radius the separatrices were
    traced with if it was not the default.
    """
    mesh = metric.mesh
    if mesh.positions is None:
        raise SkeletonError("skeleton extraction needs vertex positions")
    tracer = _Tracer(metric, [])
    angles, corners, alpha = tracer.angles, tracer.corners, tracer.alpha
    scale = tracer.scale
    if stop_radius is None:
        stop_radius = STOP_RADIUS_FACTOR * scale
    merge_radius = 1e-6 * scale
    reg = _NodeRegistry(mesh, corners, merge_radius)

    singular = sorted(v for v, k in prescription if k != 0)
    fans = {v: _cone_fan(mesh, angles, v) for v in singular}
    for v in singular:
        f0 = fans[v][0][0][0] // 3
        j0 = int(np.nonzero(mesh.faces[f0] == v)[0][0])
        node = reg.add("cone", f0, corners[f0, j0], vertex=v,
                       total_angle=fans[v][1])
        node.on_boundary = bool(mesh.is_boundary_vertex[v])

    if separatrices:
        strands = [{"steps": sep.steps, "closed": False, "sep": sep}
                   for sep in separatrices]
    elif singular:
        strands = []   # only zero-ray cones (e.g. convex corners)
    else:
        strands = _synthesize_torus_leaves(metric, field, tracer, reg)

    events = [[] for _ in strands]
    for si, st in enumerate(strands):
        offs, total = _strand_offsets(st["steps"])
        st["offsets"], st["total"] = offs, total
        if st["closed"]:
            events[si].append((0.0, st["seed_node"]))

    _detect_crossings(strands, events, reg, scale)

    for si, st in enumerate(strands):
        if st["closed"]:
            continue
        sep = st["sep"]
        events[si].append((0.0, reg.by_vertex[sep.vertex].ident))
        tr = sep.trace
        if tr.status == "cone":
            events[si].append((st["total"], reg.by_vertex[tr.end_vertex].ident))
        elif tr.status == "boundary":
            last = tr.steps[-1]
            foot = reg.add("foot", last.face, last.b, total_angle=np.pi)
            if foot.kind == "foot" and foot.anchor_he < 0:
                foot.anchor_he = int(last.crossed)
                foot.on_boundary = True
            events[si].append((st["total"], foot.ident))
        else:
            raise SkeletonError(
                f"separatrix ended with status {tr.status}; cannot anchor it")

    arcs = []
    for si, st in enumerate(strands):
        _strand_arcs(arcs, st, events[si])

    _boundary_arcs(mesh, metric, reg, arcs, corners)

    _assign_rotations(metric, reg, arcs, fans, alpha)

    patches = _walk_patches(reg.nodes, arcs, 4.0 * stop_radius)

    chi = mesh.euler_characteristic
    got = len(reg.nodes) - len(arcs) + len(patches)
    if got != chi:
        raise SkeletonError(
            f"arrangement Euler count {got} != surface {chi}: "
            f"{len(reg.nodes)} nodes, {len(arcs)} arcs, {len(patches)} patches")

    return Skeleton(metric=metric, nodes=reg.nodes, arcs=arcs, patches=patches)


def _strand_arcs(arcs, st, evts):
    """Split one strand at its events and append the resulting arcs."""
    total = st["total"]
    tol = 1e-9 * max(total, 1.0)
    if st["closed"]:
        evts = [((p % total), n) for p, n in evts]
    merged = []
    for p, n in sorted(set(evts)):
        if merged and n == merged[-1][1] and p - merged[-1][0] <= tol:
            continue
        merged.append((p, n))
    if st["closed"]:
        # param 0 and param total are the same point
        if len(merged) > 1 and merged[0][1] == merged[-1][1] and \
                total - merged[-1][0] + merged[0][0] <= tol:
            merged.pop()
        params = [p for p, _ in merged]
        pieces = _split_strand(st["steps"], st["offsets"], params)
        wrap = pieces[-1] + pieces[0]
        m = len(merged)
        for i in range(m):
            n0 = merged[i][1]
            n1 = merged[(i + 1) % m][1]
            seg = wrap if i == m - 1 else pieces[i + 1]
            seg = [s for s in seg if s.length > 0.0]
            if not seg:
                raise SkeletonError("empty piece of a closed leaf")
            arcs.append(SkeletonArc(len(arcs), "separatrix", n0, n1,
                                    sum(s.length for s in seg), seg))
    else:
        if merged[0][0] > tol or total - merged[-1][0] > tol:
            raise SkeletonError("strand events do not span the strand")
        params = [p for p, _ in merged[1:-1]]
        pieces = _split_strand(st["steps"], st["offsets"], params)
        if len(pieces) != len(merged) - 1:
            raise SkeletonError("strand split mismatch")
        end_dir = st["sep"].trace.end_direction
        for i in range(len(merged) - 1):
            seg = [s for s in pieces[i] if s.length > 0.0]
            if not seg:
                raise SkeletonError("empty separatrix piece between nodes")
            arcs.append(SkeletonArc(len(arcs), "separatrix",
                                    merged[i][1], merged[i + 1][1],
                                    sum(s.length for s in seg), seg,
                                    head_dir=end_dir
                                    if i == len(merged) - 2 else None))


def _synthesize_torus_leaves(metric, field, tracer, reg):
    """Two closed field leaves through a common seed in face 0, with the
    seed registered as a crossing node.

    A leaf that runs exactly into a vertex derails the tracer, but only a
    measure-zero set of seeds does that, so a few fixed generic placements
    are tried before giving up.
    """
    mesh = metric.mesh
    if mesh.boundary_loops() or mesh.euler_characteristic != 0:
        raise SkeletonError(
            "no separatrices and the surface is not a closed torus; "
            "prescribe singularities first")
    a, b, c = tracer.corners[0]
    weights = [(0.31830988618367, 0.27182818284590),
               (0.17320508075689, 0.41421356237310),
               (0.23606797749979, 0.29289321881345),
               (0.36787944117144, 0.14142135623731)]
    last = None
    for wb, wc in weights:
        seed = a + wb * (b - a) + wc * (c - a)
        strands = []
        try:
            for branch in range(2):
                d = float(field.angles[0]) + branch * (np.pi / 2.0)
                tr = tracer.run(0, seed, d, 200.0 * tracer.scale,
                                1e-7 * tracer.scale)
                if tr.status != "closed":
                    raise TraceError(
                        f"synthesized torus leaf did not close "
                        f"(status {tr.status})")
                strands.append({"steps": tr.steps, "closed": True,
                                "sep": None})
        except TraceError as exc:
            last = exc
            continue
        node = reg.add("crossing", 0, seed)
        for st in strands:
            st["seed_node"] = node.ident
        return strands
    raise last


def _detect_crossings(strands, events, reg, scale):
    """Register transversal intersections between strand segments.

    Near-parallel overlapping segments make the arrangement degenerate and
    raise OverlappingSeparatrices.
    """
    by_face = {}
    for si, st in enumerate(strands):
        offs = st["offsets"]
        for k, s in enumerate(st["steps"]):
            if s.length == 0.0:
                continue
            by_face.setdefault(s.face, []).append((si, k, s, offs[k]))
    for f in sorted(by_face):
        segs = by_face[f]
        for i in range(len(segs)):
            si, ki, s_i, off_i = segs[i]
            for j in range(i + 1, len(segs)):
                sj, kj, s_j, off_j = segs[j]
                if si == sj:
                    n = len(strands[si]["steps"])
                    adjacent = abs(ki - kj) <= 1
                    if strands[si]["closed"]:
                        adjacent = adjacent or {ki, kj} == {0, n - 1}
                    if adjacent:
                        continue
                _segment_crossing(events, reg, scale, f,
                                  si, s_i, off_i, sj, s_j, off_j)


def _segment_crossing(events, reg, scale, f, si, s_i, off_i, sj, s_j, off_j):
    a, b = s_i.a, s_i.b
    c, d = s_j.a, s_j.b
    u, w = b - a, d - c
    den = float(np.imag(np.conj(u) * w))
    if abs(den) <= 1e-12 * abs(u) * abs(w):
        gap = min(_point_segment_distance(c, a, b),
                  _point_segment_distance(d, a, b),
                  _point_segment_distance(a, c, d),
                  _point_segment_distance(b, c, d))
        if gap < 1e-9 * scale:
            raise OverlappingSeparatrices(
                f"parallel separatrix segments overlap in face {f}")
        return
    r = c - a
    s = float(np.imag(np.conj(r) * w)) / den
    t = float(np.imag(np.conj(r) * u)) / den
    eps = 1e-9
    if not (-eps <= s <= 1.0 + eps and -eps <= t <= 1.0 + eps):
        return
    s = min(max(s, 0.0), 1.0)
    t = min(max(t, 0.0), 1.0)
    node = reg.add("crossing", f, a + s * u)
    events[si].append((off_i + s * abs(u), node.ident))
    events[sj].append((off_j + t * abs(w), node.ident))


def _boundary_arcs(mesh, metric, reg, arcs, corners):
    """Arcs along each boundary loop between consecutive stations (boundary
    cones and feet), walked in the interior halfedge direction."""
    n_int = mesh.n_interior_halfedges
    if mesh.n_halfedges == n_int:
        return
    lengths = metric.lengths
    feet_by_he = {}
    for n in reg.nodes:
        if n.kind == "foot":
            feet_by_he.setdefault(n.anchor_he, []).append(n)

    done = np.zeros(mesh.n_halfedges - n_int, dtype=bool)
    for b0 in range(n_int, mesh.n_halfedges):
        if done[b0 - n_int]:
            continue
        loop = []
        b = b0
        while not done[b - n_int]:
            done[b - n_int] = True
            loop.append(b)
            b = int(mesh.he_next[b])
        # boundary halfedges run with the surface on the right; the walk
        # keeps patches on the left, so traverse in the twins' direction
        run = [int(mesh.he_twin[bb]) for bb in reversed(loop)]

        stations = []
        cum = 0.0
        for h in run:
            L = float(lengths[int(mesh.he_edge[h])])
            v = int(mesh.he_origin[h])
            node = reg.by_vertex.get(v)
            if node is not None:
                stations.append((cum, node.ident))
            for foot in feet_by_he.get(h, ()):
                fj, j = h // 3, h % 3
                A, B = corners[fj, j], corners[fj, (j + 1) % 3]
                w = B - A
                t = float(np.real(np.conj(w) * (foot.point - A)) / abs(w) ** 2)
                stations.append((cum + min(max(t, 0.0), 1.0) * L, foot.ident))
            cum += L
        total = cum
        if not stations:
            raise NonRectangularPatch(
                "boundary loop without corners or feet bounds a cylinder")
        stations.sort()
        m = len(stations)
        for i in range(m):
            p0, n0 = stations[i]
            p1, n1 = stations[(i + 1) % m]
            span = (p1 - p0) % total if m > 1 else total
            if m > 1 and span <= 1e-12 * max(total, 1.0):
                raise SkeletonError("coincident boundary stations on a loop")
            steps = _boundary_steps(mesh, corners, run, lengths, p0, p0 + span)
            arcs.append(SkeletonArc(len(arcs), "boundary", n0, n1,
                                    span, steps))


def _boundary_steps(mesh, corners, run, lengths, s0, s1):
    """Chart segments along the boundary from arclength s0 to s1; s1 may
    pass the loop end and wrap."""
    seq = []
    c = 0.0
    for rep in range(2):
        for h in run:
            L = float(lengths[int(mesh.he_edge[h])])
            seq.append((c, h, L))
            c += L
    total = c / 2.0
    steps = []
    for c0, h, L in seq:
        lo, hi = max(s0, c0), min(s1, c0 + L)
        if hi - lo <= 1e-12 * max(total, 1.0):
            continue
        f, j = h // 3, h % 3
        A, B = corners[f, j], corners[f, (j + 1) % 3]
        w = B - A
        steps.append(TraceStep(f, A + ((lo - c0) / L) * w,
                               A + ((hi - c0) / L) * w))
    if not steps:
        raise SkeletonError("boundary arc with no geometry")
    return steps


def _assign_rotations(metric, reg, arcs, fans, alpha):
    """Fill each node's rotation list with (coord, dart).

    Dart 2*arc walks tail->head, dart 2*arc+1 walks head->tail; the coord
    is the local wedge angle of the dart's outgoing direction.
    """
    for arc in arcs:
        first, last = arc.steps[0], arc.steps[-1]
        tail, head = reg.nodes[arc.tail], reg.nodes[arc.head]
        out_dir = float(np.angle(first.b - first.a))
        if arc.head_dir is not None:
            in_rev = float(arc.head_dir) + np.pi
        else:
            in_rev = float(np.angle(last.a - last.b))
        tail.ends.append((_local_coord(metric, tail, first.face,
                                       out_dir, fans, alpha),
                          2 * arc.ident))
        head.ends.append((_local_coord(metric, head, last.face,
                                       in_rev, fans, alpha),
                          2 * arc.ident + 1))


def _local_coord(metric, node, face, direction, fans, alpha):
    """Local wedge angle at the node of a direction given in face's chart.

    Boundary wedges (feet, boundary cones) are not cyclic, so the result
    stays in [0, total]; interior nodes wrap modulo their total angle.
    """
    mesh = metric.mesh
    if node.kind == "cone":
        fan, total = fans[node.vertex]
        best = None
        fallback = None
        for h, cum, th in fan:
            if h // 3 != face:
                continue
            rel = float(wrap_angle(direction - alpha[h]))
            if -1e-6 <= rel <= th + 1e-6:
                cand = cum + min(max(rel, 0.0), th)
                if best is None or cand < best:
                    best = cand
            elif fallback is None:
                # an arriving ray can stop one face past the wedge holding
                # its true direction; the unrolled charts agree across the
                # spoke, so the out-of-wedge angle still lands correctly
                fallback = cum + rel
        if best is None:
            best = fallback
        if best is None:
            raise SkeletonError(
                f"direction at cone {node.vertex} misses every fan corner")
        if node.on_boundary:
            return min(max(best, 0.0), total)
        return best % total
    if node.kind == "foot":
        h = node.anchor_he
        if h < 0:
            raise SkeletonError(f"foot node {node.ident} has no anchor edge")
        direction = _dir_in_chart(metric, h // 3, face, direction)
        rel = float(wrap_angle(direction - alpha[h]))
        if rel < -np.pi / 2.0:
            # a dart along the boundary at wedge angle pi can wrap to -pi
            rel += 2.0 * np.pi
        return min(max(rel, 0.0), np.pi)
    direction = _dir_in_chart(metric, node.face, face, direction)
    return float(direction) % (2.0 * np.pi)


def _dir_in_chart(metric, want_face, have_face, direction):
    """Rotate a direction from the chart of have_face into want_face; the
    faces must coincide or share an edge (arcs split on an edge land one
    step into the neighbouring face)."""
    if want_face == have_face:
        return direction
    mesh = metric.mesh
    for j in range(3):
        h = 3 * have_face + j
        t = int(mesh.he_twin[h])
        if mesh.he_face[t] >= 0 and t // 3 == want_face:
            R, _ = face_transition(metric, h)
            return direction + float(np.angle(R))
    raise SkeletonError(
        f"faces {want_face} and {have_face} are not adjacent; cannot "
        "align chart directions at a node")


def _walk_patches(nodes, arcs, len_slop):
    """Face walk keeping patches on the left; boundary arcs contribute only
    their interior-side dart. Every cycle must be a rectangle; opposite
    sides may disagree by len_slop absolute on top of the relative
    tolerance, covering proximity-terminated trace lengths."""
    for n in nodes:
        n.ends.sort()
        for (c0, _), (c1, _) in zip(n.ends, n.ends[1:]):
            if c1 - c0 < 1e-7:
                raise OverlappingSeparatrices(
                    f"two arcs leave node {n.ident} in the same direction")

    def next_dart(d):
        arc = arcs[d // 2]
        node = nodes[arc.head if d % 2 == 0 else arc.tail]
        ends = node.ends
        k = next((i for i, (_, dd) in enumerate(ends) if dd == (d ^ 1)), None)
        if k is None:
            raise SkeletonError("dart missing from its node rotation")
        if len(ends) == 1:
            return ends[0][1], node.total_angle, node.ident
        if node.on_boundary:
            if k == 0:
                raise SkeletonError(
                    f"patch walk leaves the surface at node {node.ident}")
            c_prev, d_prev = ends[k - 1]
            return d_prev, ends[k][0] - c_prev, node.ident
        c_prev, d_prev = ends[(k - 1) % len(ends)]
        turn = (ends[k][0] - c_prev) % node.total_angle
        if turn == 0.0:
            turn = node.total_angle
        return d_prev, turn, node.ident

    unused = set()
    for a in arcs:
        unused.add(2 * a.ident)
        if a.kind != "boundary":
            unused.add(2 * a.ident + 1)

    patches = []
    while unused:
        d0 = min(unused)
        cycle, corner_nodes, turns = [], [], []
        d = d0
        guard = 0
        while True:
            guard += 1
            if guard > 4 * len(arcs) + 8:
                raise SkeletonError("patch walk does not close")
            if d not in unused:
                raise SkeletonError("patch walk reused a dart")
            unused.discard(d)
            cycle.append(d)
            d_next, turn, node_id = next_dart(d)
            corner_nodes.append(node_id)
            turns.append(turn)
            d = d_next
            if d == d0:
                break
        if len(cycle) != 4:
            raise NonRectangularPatch(
                f"patch with {len(cycle)} sides through nodes {corner_nodes}")
        for t in turns:
            if abs(t - np.pi / 2.0) > ANGLE_TOL:
                raise NonRectangularPatch(
                    f"patch corner turn {t:.8f} is not a quarter "
                    f"(tolerance {ANGLE_TOL})")
        lens = [arcs[dd // 2].length for dd in cycle]
        for i in range(2):
            a, b = lens[i], lens[i + 2]
            if abs(a - b) > LENGTH_REL_TOL * max(a, b) + len_slop:
                raise NonRectangularPatch(
                    f"opposite patch sides {a:.9g} and {b:.9g} differ "
                    f"beyond {LENGTH_REL_TOL} relative + {len_slop:.3g} "
                    f"termination slop")
        patches.append(SkeletonPatch(
            ident=len(patches),
            darts=[(dd // 2, 1 if dd % 2 == 0 else -1) for dd in cycle],
            corners=corner_nodes,
            side_lengths=lens))
    return patches
