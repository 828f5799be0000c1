"""Geodesic tracing through face charts, and separatrix extraction.

A geodesic is a straight line in every chart: inside a face it is a
segment, and crossing an edge applies the rigid chart transition to both
point and direction. On a metric with exact quarter-turn holonomy a
geodesic started along a cross field branch stays aligned with the field
forever, so the separatrices of the field are plain geodesics shot out of
every cone along its field directions.

Traces stop on a singular vertex (within stop_radius), on the boundary,
on closing up, or on exhausting the length budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfiniteSeparatrix, StartOnVertex, TraceError
from .holonomy import QUARTER, face_chart_corners, face_transition, \
    halfedge_chart_angles, wrap_angle
from .metric import ConeMetric, corner_angles, total_area

STOP_RADIUS_FACTOR = 1e-4
MAX_LENGTH_FACTOR = 50.0
DIRECTION_TOL = 1e-6


@dataclass
class TraceStep:
    face: int
    a: complex
    b: complex
    crossed: int = -1   # interior halfedge crossed to leave; on the last
                        # step only a boundary hit records one

    @property
    def length(self):
        return abs(self.b - self.a)


@dataclass
class Trace:
    steps: list
    status: str          # "cone" | "boundary" | "closed" | "budget"
    length: float
    end_vertex: int = -1
    # carried direction at termination, in the final step's face chart; the
    # final recorded segment bends toward the cone it stops at, so its own
    # angle is off by up to stop_radius / segment_length radians
    end_direction: float | None = None

    def to_dict(self):
        return {
            "status": self.status,
            "length": self.length,
            "endVertex": self.end_vertex,
            "endDirection": self.end_direction,
            "steps": [{"face": s.face,
                       "a": [s.a.real, s.a.imag],
                       "b": [s.b.real, s.b.imag],
                       "crossed": s.crossed} for s in self.steps],
        }


def chart_barycentric(corners_f: np.ndarray, p: complex) -> np.ndarray:
    """Barycentric coordinates of chart point p in its face triangle."""
    a, b, c = corners_f
    v0, v1, v2 = b - a, c - a, p - a
    d = float(np.imag(np.conj(v0) * v1))
    wb = float(np.imag(np.conj(v2) * v1)) / d
    wc = float(np.imag(np.conj(v0) * v2)) / d
    return np.array([1.0 - wb - wc, wb, wc])


def step_points_3d(mesh, corners, step: TraceStep, ts) -> np.ndarray:
    """Sample a trace step at parameters ts into embedded coordinates."""
    f = step.face
    verts = mesh.faces[f]
    pts = []
    for t in ts:
        p = step.a + t * (step.b - step.a)
        bary = chart_barycentric(corners[f], p)
        pts.append(bary @ mesh.positions[verts])
    return np.asarray(pts)


class _Tracer:
    """Shared precomputation for many traces over one metric."""

    def __init__(self, metric: ConeMetric, singular=()):
        self.metric = metric
        self.mesh = metric.mesh
        self.angles = corner_angles(metric)
        self.corners = face_chart_corners(metric, self.angles)
        self.alpha = halfedge_chart_angles(metric, self.angles)
        self.scale = float(np.sqrt(max(total_area(metric), 1e-300)))
        self.singular = set(int(v) for v in singular)
        self._transitions = {}

    def transition(self, h):
        tr = self._transitions.get(h)
        if tr is None:
            tr = face_transition(self.metric, h, self.corners)
            self._transitions[h] = tr
        return tr

    def run(self, face, point, direction, max_length, stop_radius,
            skip_cone_in_first_face=-1):
        mesh = self.mesh
        d = np.exp(1j * float(direction))
        p = complex(point)
        f = int(face)
        steps = []
        length = 0.0
        start = (f, p, d)
        entry = -1
        first = True
        guard = 0
        max_steps = 60 * mesh.n_faces + 1000
        while True:
            guard += 1
            if guard > max_steps:
                return Trace(steps, "budget", length)
            exit_h, q = self._face_exit(f, p, d, entry)
            hit = self._cone_hit(f, p, q,
                                 skip_cone_in_first_face if first else -1,
                                 stop_radius)
            if hit >= 0:
                cpos = self._corner_pos(f, hit)
                steps.append(TraceStep(f, p, cpos))
                length += abs(cpos - p)
                v = int(mesh.faces[f][hit])
                return Trace(steps, "cone", length, end_vertex=v,
                             end_direction=float(np.angle(d)))
            if not first and f == start[0]:
                # a closed leaf passes through the start point mid face
                w = q - p
                L2 = abs(w) ** 2
                if L2 > 0.0:
                    tp = float(np.real(np.conj(w) * (start[1] - p))) / L2
                    tp = min(max(tp, 0.0), 1.0)
                    near = abs(start[1] - (p + tp * w)) <= stop_radius
                    aligned = abs(wrap_angle(
                        np.angle(d) - np.angle(start[2]))) <= DIRECTION_TOL
                    if near and aligned:
                        steps.append(TraceStep(f, p, start[1]))
                        length += abs(start[1] - p)
                        return Trace(steps, "closed", length,
                                     end_direction=float(np.angle(d)))
            seg_len = abs(q - p)
            if length + seg_len >= max_length:
                q = p + (max_length - length) * d
                steps.append(TraceStep(f, p, q))
                return Trace(steps, "budget", max_length,
                             end_direction=float(np.angle(d)))
            t = int(mesh.he_twin[exit_h])
            steps.append(TraceStep(f, p, q, crossed=exit_h))
            length += seg_len
            if mesh.he_face[t] < 0:
                # keep crossed: callers need the boundary edge that was hit
                return Trace(steps, "boundary", length,
                             end_direction=float(np.angle(d)))
            R, tr = self.transition(exit_h)
            p = R * q + tr
            d = R * d
            f = t // 3
            entry = t
            first = False

    def _corner_pos(self, f, j):
        return complex(self.corners[f, j])

    def _face_exit(self, f, p, d, entry):
        """First side hit by the ray p + s d inside face f.

        The hit parameter along the side is clamped into the open interval
        so exact vertex hits slide onto the adjacent edge instead of
        escaping through the corner.
        """
        best = None
        for j in range(3):
            h = 3 * f + j
            if h == entry:
                continue
            A = self.corners[f, j]
            B = self.corners[f, (j + 1) % 3]
            w = B - A
            den = float(np.imag(np.conj(d) * w))
            if abs(den) < 1e-300:
                continue
            r = A - p
            s = float(np.imag(np.conj(r) * w)) / den
            tau = float(np.imag(np.conj(r) * d)) / den
            if s <= 1e-12 * self.scale:
                continue
            if tau < -1e-9 or tau > 1.0 + 1e-9:
                continue
            if best is None or s < best[0]:
                best = (s, j, tau)
        if best is None:
            raise TraceError(
                f"ray escaped face {f}: start {p}, direction {np.angle(d):.6f}")
        s, j, tau = best
        tau = min(max(tau, 1e-12), 1.0 - 1e-12)
        A = self.corners[f, j]
        B = self.corners[f, (j + 1) % 3]
        return 3 * f + j, A + tau * (B - A)

    def _cone_hit(self, f, p, q, skip_vertex, stop_radius):
        """Index (0..2) of a singular corner of f within stop_radius of
        segment p-q, or -1. skip_vertex suppresses the ray's own origin."""
        if not self.singular:
            return -1
        hit, hit_d = -1, np.inf
        for j in range(3):
            v = int(self.mesh.faces[f][j])
            if v not in self.singular or v == skip_vertex:
                continue
            c = complex(self.corners[f, j])
            dseg = _point_segment_distance(c, p, q)
            if dseg <= stop_radius and dseg < hit_d:
                hit, hit_d = j, dseg
        return hit


def _point_segment_distance(c, a, b):
    w = b - a
    L2 = abs(w) ** 2
    if L2 == 0.0:
        return abs(c - a)
    t = float(np.real(np.conj(w) * (c - a))) / L2
    t = min(max(t, 0.0), 1.0)
    return abs(c - (a + t * w))


def trace_geodesic(metric: ConeMetric, face: int, point, direction: float,
                   max_length: float | None = None,
                   stop_radius: float | None = None,
                   singular=()) -> Trace:
    """Trace one geodesic from a chart point inside a face.

    point is complex (or a pair) in face's canonical chart. Raises
    StartOnVertex when the start coincides with a corner of the face,
    where the owning face is ambiguous.
    """
    tracer = _Tracer(metric, singular)
    if max_length is None:
        max_length = MAX_LENGTH_FACTOR * tracer.scale
    if stop_radius is None:
        stop_radius = STOP_RADIUS_FACTOR * tracer.scale
    p = complex(point[0], point[1]) if isinstance(point, (tuple, list, np.ndarray)) \
        else complex(point)
    if min(abs(p - tracer.corners[face, j]) for j in range(3)) < 1e-12 * tracer.scale:
        raise StartOnVertex(
            f"start point sits on a corner of face {face}; shift it or "
            "trace from the cone emitter instead")
    return tracer.run(face, p, direction, max_length, stop_radius)


@dataclass
class Separatrix:
    vertex: int          # emitting cone
    ray: int             # index among the cone's emitted directions
    cone_angle_coord: float
    trace: Trace

    @property
    def steps(self):
        return self.trace.steps

    @property
    def length(self):
        return self.trace.length

    @property
    def end_kind(self):
        return self.trace.status

    @property
    def end_vertex(self):
        return self.trace.end_vertex

    def to_dict(self):
        return {"vertex": self.vertex, "ray": self.ray,
                "coneAngleCoord": self.cone_angle_coord,
                **self.trace.to_dict()}


def cone_ray_directions(metric: ConeMetric, field, v: int):
    """Field-aligned ray directions out of cone v.

    Returns a list of (face, chart_direction, cone_coordinate). The cone
    coordinate measures counter-clockwise angle from the first fan spoke
    (for boundary cones: from the inbound boundary tangent), so interior
    cones of index k yield 4-k rays spaced pi/2 and boundary cones yield
    their interior rays only.
    """
    mesh = metric.mesh
    angles = corner_angles(metric)
    alpha = halfedge_chart_angles(metric, angles)
    # vertex_outgoing is counter-clockwise; for boundary vertices it starts
    # at the outgoing boundary halfedge, so dropping non-face spokes leaves
    # the interior wedge in order, measured from the inbound tangent.
    spokes = [h for h in mesh.vertex_outgoing(v) if mesh.he_face[h] >= 0]

    rays = []
    cum = 0.0
    for h in spokes:
        f = h // 3
        theta = angles[int(mesh.he_next[h])]
        c_f = field.angles[f]
        rel = (c_f - alpha[h]) % QUARTER
        if rel > QUARTER - 1e-9:
            rel = 0.0   # direction sits on the spoke itself
        # directions within 1e-9 of the closing side belong to the next
        # wedge, where they re-enter as rel 0 and launch exactly on-spoke
        j = 0
        while rel + j * QUARTER < theta - 1e-9:
            coord = cum + rel + j * QUARTER
            rays.append((f, alpha[h] + rel + j * QUARTER, coord))
            j += 1
        cum += theta

    total = cum
    eps = 1e-7
    if mesh.is_boundary_vertex[v]:
        rays = [r for r in rays if eps < r[2] < total - eps]
    # dedupe directions that landed on a spoke and were found in both corners
    rays.sort(key=lambda r: r[2])
    dedup = []
    for r in rays:
        if dedup and abs(r[2] - dedup[-1][2]) < 1e-9:
            continue
        if not mesh.is_boundary_vertex[v] and dedup and \
                abs((r[2] - dedup[0][2]) - total) < 1e-9:
            continue
        dedup.append(r)
    return dedup, total


def _run_with_nudges(tracer, f, p0, direction, max_length, stop_radius, v):
    """Trace a separatrix ray, rotating it slightly when it degenerates.

    A ray launched exactly along a chain of collinear mesh edges threads
    every vertex on the chain; the per-vertex perturbation can then leave
    no admissible exit side. Rotating the launch by 1e-9 displaces the
    line by under 1e-7 of the budget, far inside the stop radius, and
    turns the vertex hits into ordinary crossings.
    """
    last = None
    for nudge in (0.0, 1e-9, -1e-9, 1e-8, -1e-8):
        try:
            return tracer.run(f, p0, direction + nudge, max_length,
                              stop_radius, skip_cone_in_first_face=v)
        except TraceError as e:
            last = e
    raise last


def trace_separatrices(metric: ConeMetric, field, prescription,
                       max_length: float | None = None,
                       stop_radius: float | None = None) -> list:
    """Shoot every cone's field directions and collect the separatrices.

    Cone-to-cone curves are traced from both ends; the duplicate copy is
    dropped (matched by endpoints, length, and midpoint). Rays that
    exhaust the length budget abort the whole extraction with
    InfiniteSeparatrix listing them.
    """
    mesh = metric.mesh
    singular = sorted(v for v, k in prescription if k != 0)
    tracer = _Tracer(metric, singular)
    if max_length is None:
        max_length = MAX_LENGTH_FACTOR * tracer.scale
    if stop_radius is None:
        stop_radius = STOP_RADIUS_FACTOR * tracer.scale

    seps = []
    runaway = []
    for v in singular:
        k = prescription.index_of(v)
        rays, total = cone_ray_directions(metric, field, v)
        expected = (2 - k) - 1 if mesh.is_boundary_vertex[v] else 4 - k
        if len(rays) != expected:
            raise TraceError(
                f"cone {v}: found {len(rays)} field directions, expected "
                f"{expected}; cross field is inconsistent at the cone")
        for ri, (f, chart_dir, coord) in enumerate(rays):
            j = int(np.nonzero(mesh.faces[f] == v)[0][0])
            p0 = complex(tracer.corners[f, j])
            tr = _run_with_nudges(tracer, f, p0, chart_dir, max_length,
                                  stop_radius, v)
            if tr.status == "budget":
                runaway.append((v, ri))
                continue
            seps.append(Separatrix(vertex=v, ray=ri,
                                   cone_angle_coord=float(coord), trace=tr))
    if runaway:
        raise InfiniteSeparatrix(
            f"{len(runaway)} rays exceeded the length budget "
            f"{max_length:.3g}; they do not terminate", rays=runaway)

    return _dedup_separatrices(mesh, tracer.corners, seps, stop_radius)


def _midpoint_3d(mesh, corners, sep: Separatrix):
    if mesh.positions is None:
        acc = 0.0
        for s in sep.steps:
            acc += s.length
        return np.array([acc, 0.0, 0.0])
    half = 0.5 * sep.length
    acc = 0.0
    for s in sep.steps:
        L = s.length
        if acc + L >= half and L > 0:
            t = (half - acc) / L
            return step_points_3d(mesh, corners, s, [t])[0]
        acc += L
    last = sep.steps[-1]
    return step_points_3d(mesh, corners, last, [1.0])[0]


def _dedup_separatrices(mesh, corners, seps, stop_radius):
    # each trace stops within stop_radius of the cone and bends to it, so
    # the two copies of one curve can differ in length by up to ~2 radii
    # per end; distinct curves through the same pair differ by patch size
    scale = max((s.length for s in seps), default=1.0)
    len_tol = max(1e-6 * scale, 4.0 * stop_radius)
    mid_tol = max(1e-5 * scale, 4.0 * stop_radius)
    kept = []
    for s in seps:
        if s.end_kind != "cone":
            kept.append(s)
            continue
        dup = False
        for t in kept:
            if t.end_kind != "cone":
                continue
            if {t.vertex, t.end_vertex} != {s.vertex, s.end_vertex}:
                continue
            if abs(t.length - s.length) > len_tol:
                continue
            mt = _midpoint_3d(mesh, corners, t)
            ms = _midpoint_3d(mesh, corners, s)
            if np.linalg.norm(mt - ms) <= mid_tol:
                dup = True
                break
        if not dup:
            kept.append(s)
    return kept
