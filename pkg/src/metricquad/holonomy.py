"""Rotational holonomy of a flat cone metric.

Every face carries a canonical chart: its first halfedge (slot 3f) runs
along the positive x axis from the origin. Crossing an interior edge is a
rigid motion between the two charts; composing crossings along a closed
dual loop gives the loop's holonomy rotation. A metric admits a seamless
quad-aligned structure exactly when every generator's rotation is a
multiple of pi/2: loops around cones (rotation = angle defect), loops
through the cut (rotation = the segment pairing angle), and boundary
collars (sum of boundary vertex turnings, so already covered by vertex
defects).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cut import build_cut_graph, slice_along
from .immersion import immerse, segment_pairings
from .metric import ConeMetric, corner_angles, vertex_curvature

QUARTER = np.pi / 2.0


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(-np.asarray(a) + np.pi, 2.0 * np.pi)
    return -(w - np.pi)


def quarter_residual(a):
    """Signed distance to the nearest multiple of pi/2."""
    a = np.asarray(a, dtype=float)
    k = np.round(a / QUARTER)
    return a - k * QUARTER


def face_chart_corners(metric: ConeMetric, angles: np.ndarray | None = None) -> np.ndarray:
    """(F, 3) complex corner positions; corner j is origin of slot 3f+j."""
    if angles is None:
        angles = corner_angles(metric)
    lh = metric.halfedge_lengths().reshape(-1, 3)
    ang = angles.reshape(-1, 3)
    F = lh.shape[0]
    out = np.zeros((F, 3), dtype=complex)
    out[:, 1] = lh[:, 0]
    out[:, 2] = lh[:, 2] * np.exp(1j * ang[:, 1])
    return out


def halfedge_chart_angles(metric: ConeMetric, angles: np.ndarray | None = None) -> np.ndarray:
    """Direction of each interior halfedge inside its own face chart."""
    if angles is None:
        angles = corner_angles(metric)
    ang = angles.reshape(-1, 3)
    F = ang.shape[0]
    out = np.empty(3 * F)
    out[0::3] = 0.0
    out[1::3] = np.pi - ang[:, 2]
    out[2::3] = np.pi + ang[:, 1]
    return out


def face_transition(metric: ConeMetric, h: int,
                    corners: np.ndarray | None = None):
    """Rigid motion chart(face(h)) -> chart(face(twin(h))) as (R, t).

    A point z in the chart of h's face appears at R*z + t in the twin
    face's chart. R is normalized to unit modulus.
    """
    m = metric.mesh
    if corners is None:
        corners = face_chart_corners(metric)
    t_he = int(m.he_twin[h])
    f, g = h // 3, t_he // 3
    if m.he_face[h] < 0 or m.he_face[t_he] < 0:
        raise ValueError(f"halfedge {h} is not interior on both sides")
    j, k = h % 3, t_he % 3
    a_f, b_f = corners[f, j], corners[f, (j + 1) % 3]
    # origin(h) == dest(twin), dest(h) == origin(twin)
    a_g, b_g = corners[g, (k + 1) % 3], corners[g, k]
    R = (b_g - a_g) / (b_f - a_f)
    R /= abs(R)
    t = a_g - R * a_f
    return R, t


def holonomy_of_loop(metric: ConeMetric, crossings) -> float:
    """Total rotation along a closed dual loop, wrapped to (-pi, pi].

    crossings is a sequence of interior halfedges; crossing h moves from
    face(h) into face(twin(h)), and consecutive crossings must chain
    (face(twin(h_i)) == face(h_{i+1})), closing back to face(h_0).
    """
    m = metric.mesh
    alpha = halfedge_chart_angles(metric)
    total = 0.0
    n = len(crossings)
    if n == 0:
        return 0.0
    for i, h in enumerate(crossings):
        t = int(m.he_twin[h])
        if m.he_face[t] < 0:
            raise ValueError(f"crossing {h} leaves the surface")
        nxt = crossings[(i + 1) % n]
        if nxt // 3 != t // 3:
            raise ValueError(
                f"crossings {h} -> {nxt} do not chain through face {t // 3}")
        total += alpha[t] + np.pi - alpha[h]
    return float(wrap_angle(total))


def vertex_loop(mesh, v: int) -> list:
    """Interior halfedges crossed by a counter-clockwise loop around v."""
    if mesh.is_boundary_vertex[v]:
        raise ValueError(f"vertex {v} is on the boundary, its loop is not closed")
    return [mesh.prev_halfedge(h) for h in mesh.vertex_outgoing(v)]


@dataclass
class HolonomyEntry:
    kind: str       # "cone" | "segment" | "boundary"
    ident: int
    angle: float
    nearest: int    # nearest multiple of pi/2
    residual: float

    def to_dict(self):
        return {"kind": self.kind, "id": self.ident, "angle": self.angle,
                "nearestQuarter": self.nearest, "residual": self.residual}


@dataclass
class HolonomyReport:
    ok: bool
    tol: float
    max_residual: float
    entries: list = field(default_factory=list)

    def offenders(self):
        return [e for e in self.entries if abs(e.residual) > self.tol]

    def to_dict(self):
        return {"ok": self.ok, "tol": self.tol, "maxResidual": self.max_residual,
                "entries": [e.to_dict() for e in self.entries]}


def holonomy_signature(metric: ConeMetric, pairings, tol: float = 0.01) -> HolonomyReport:
    """Evaluate the quarter-rotation condition on cones and cut segments.

    Cone entries cover every vertex whose defect is not numerically zero;
    boundary vertices enter the same way because a boundary loop's
    direction transport is the sum of its vertices' turnings. Segment
    entries are the pairing rotations.
    """
    m = metric.mesh
    K = vertex_curvature(metric)
    entries = []
    for v in range(m.n_vertices):
        # |K| <= tol/2 implies |residual| <= tol/2 < tol: never an offender,
        # and listing every almost-flat vertex would drown the report.
        if abs(K[v]) <= 0.5 * tol:
            continue
        r = float(quarter_residual(K[v]))
        entries.append(HolonomyEntry(
            kind="boundary" if m.is_boundary_vertex[v] else "cone",
            ident=v, angle=float(K[v]),
            nearest=int(np.round(K[v] / QUARTER)), residual=r))
    for p in pairings:
        a = float(wrap_angle(p.rotation))
        entries.append(HolonomyEntry(
            kind="segment", ident=p.segment, angle=a,
            nearest=int(np.round(a / QUARTER)),
            residual=float(quarter_residual(a))))
    max_res = max((abs(e.residual) for e in entries), default=0.0)
    return HolonomyReport(ok=max_res <= tol, tol=tol,
                          max_residual=max_res, entries=entries)


def check_holonomy_condition(metric: ConeMetric, prescription,
                             tol: float = 0.01) -> HolonomyReport:
    """Cut, slice, immerse, then test all generators against pi/2 multiples.

    Convenience wrapper over holonomy_signature for callers that have not
    built the cut yet; the metric must already be flat away from cones.
    """
    cut = build_cut_graph(metric.mesh, metric, prescription)
    sliced = slice_along(metric.mesh, metric, cut)
    imm = immerse(sliced.metric)
    pairings = segment_pairings(imm, sliced, prescription)
    return holonomy_signature(metric, pairings, tol=tol)
