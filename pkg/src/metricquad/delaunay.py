"""Intrinsic Delaunay retriangulation by edge flips.

Edges are flipped inside the metric, not in any embedding: the two faces
adjacent to an edge unfold isometrically into the plane and the flipped
length is the planar distance between the opposite corners. An interior
edge is kept when the two angles opposite it sum to at most pi; a strictly
larger sum always admits a flip because the unfolded quad is convex there.
Flips preserve the metric (and hence all curvatures), only the
triangulation changes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriangle, NoConvergence, NonFlippable
from .mesh import TriangleMesh
from .metric import ConeMetric

# Angle sums within DELAUNAY_SLACK of pi are treated as Delaunay so that
# cocircular configurations do not flip back and forth.
DELAUNAY_SLACK = 1e-10


def _opposite_angle(l_opp, l_1, l_2):
    c = (l_1 * l_1 + l_2 * l_2 - l_opp * l_opp) / (2.0 * l_1 * l_2)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def edge_angle_sums(metric: ConeMetric) -> np.ndarray:
    """Sum of the angles opposite each edge, one per adjacent face."""
    m = metric.mesh
    from .metric import corner_angles
    ang = corner_angles(metric)
    sums = np.zeros(m.n_edges)
    he = np.arange(m.n_interior_halfedges)
    np.add.at(sums, m.he_edge[he], ang[he])
    return sums


def is_delaunay(metric: ConeMetric, e: int) -> bool:
    m = metric.mesh
    h = m.edge_he[e]
    t = m.he_twin[h]
    if m.he_face[t] < 0 or m.he_face[h] < 0:
        return True
    return _flip_geometry(m, metric.lengths, e)[0] <= np.pi + DELAUNAY_SLACK


def _flip_geometry(mesh: TriangleMesh, lengths: np.ndarray, e: int):
    """Unfold the two faces at e; return (opposite angle sum, new length,
    crossing parameter along the shared side in (0, 1) when flippable)."""
    h = mesh.edge_he[e]
    t = mesh.he_twin[h]
    h1, h2 = mesh.he_next[h], mesh.he_next[mesh.he_next[h]]
    t1, t2 = mesh.he_next[t], mesh.he_next[mesh.he_next[t]]
    l_ab = lengths[e]
    l_bc, l_ca = lengths[mesh.he_edge[h1]], lengths[mesh.he_edge[h2]]
    l_ad, l_db = lengths[mesh.he_edge[t1]], lengths[mesh.he_edge[t2]]

    ang_c = _opposite_angle(l_ab, l_bc, l_ca)
    ang_d = _opposite_angle(l_ab, l_ad, l_db)

    # a at the origin, b on the positive axis, c above, d below
    xc = (l_ca * l_ca + l_ab * l_ab - l_bc * l_bc) / (2.0 * l_ab)
    yc = np.sqrt(max(l_ca * l_ca - xc * xc, 0.0))
    xd = (l_ad * l_ad + l_ab * l_ab - l_db * l_db) / (2.0 * l_ab)
    yd = -np.sqrt(max(l_ad * l_ad - xd * xd, 0.0))
    l_new = float(np.hypot(xc - xd, yc - yd))
    if yc - yd <= 0.0:
        return ang_c + ang_d, l_new, -1.0
    s = yc / (yc - yd)
    x_cross = xc + s * (xd - xc)
    return ang_c + ang_d, l_new, x_cross / l_ab


def flip_edge(mesh: TriangleMesh, lengths: np.ndarray, e: int) -> float:
    """Flip interior edge e in place; lengths[e] becomes the new length.

    The edge id and the two face ids survive the flip, so external
    references by id stay valid. Raises NonFlippable when e is on the
    boundary or the unfolded quad is not strictly convex at the shared
    side (the flipped corner would invert).
    """
    h = mesh.edge_he[e]
    t = mesh.he_twin[h]
    if mesh.he_face[h] < 0 or mesh.he_face[t] < 0:
        raise NonFlippable(f"edge {e} is on the boundary")
    h1, h2 = mesh.he_next[h], mesh.he_next[mesh.he_next[h]]
    t1, t2 = mesh.he_next[t], mesh.he_next[mesh.he_next[t]]
    a, b = mesh.he_origin[h], mesh.he_origin[h1]
    c, d = mesh.he_origin[h2], mesh.he_origin[t2]
    if c == d:
        raise NonFlippable(f"edge {e} would flip onto a loop at vertex {c}")

    _, l_new, cross = _flip_geometry(mesh, lengths, e)
    if not 0.0 < cross < 1.0:
        raise NonFlippable(
            f"edge {e}: unfolded quad is not convex, flip would invert a corner")

    # Old rim edges and their outside partners, captured before rewiring.
    e_bc, tw_bc = mesh.he_edge[h1], mesh.he_twin[h1]
    e_ca = mesh.he_edge[h2]
    e_ad, tw_ad = mesh.he_edge[t1], mesh.he_twin[t1]
    e_db, tw_db = mesh.he_edge[t2], mesh.he_twin[t2]

    # New faces (a, d, c) on slots (h, h1, h2) and (c, d, b) on (t, t1, t2):
    #   h: a->d   h1: d->c   h2: c->a (unchanged)
    #   t: c->d   t1: d->b   t2: b->c
    mesh.he_origin[h], mesh.he_origin[h1] = a, d
    mesh.he_origin[t], mesh.he_origin[t1], mesh.he_origin[t2] = c, d, b

    mesh.he_edge[h], mesh.he_twin[h] = e_ad, tw_ad
    mesh.he_twin[tw_ad] = h
    mesh.he_edge[h1], mesh.he_twin[h1] = e, t
    mesh.he_edge[t], mesh.he_twin[t] = e, h1
    mesh.he_edge[t1], mesh.he_twin[t1] = e_db, tw_db
    mesh.he_twin[tw_db] = t1
    mesh.he_edge[t2], mesh.he_twin[t2] = e_bc, tw_bc
    mesh.he_twin[tw_bc] = t2

    mesh.edge_he[e] = h1
    mesh.edge_he[e_ad] = h
    mesh.edge_he[e_db] = t1
    mesh.edge_he[e_bc] = t2

    f, g = h // 3, t // 3
    mesh.faces[f] = mesh.he_origin[3 * f:3 * f + 3]
    mesh.faces[g] = mesh.he_origin[3 * g:3 * g + 3]

    slots = {a: h, d: h1, c: h2, b: t2}
    for v, slot in slots.items():
        if mesh.he_origin[mesh.vertex_he[v]] != v:
            mesh.vertex_he[v] = slot

    lengths[e] = l_new
    return l_new


@dataclass
class FlipReport:
    n_flips: int = 0
    flipped: list = field(default_factory=list)


def intrinsic_delaunay(metric: ConeMetric, max_flips: int | None = None) -> FlipReport:
    """Flip until every interior edge is Delaunay; mutates metric in place.

    Lazy queue: seed with all interior edges, re-test on pop, and push the
    four rim edges after each flip. The flip budget defaults to 50 per edge
    and exceeding it raises NoConvergence (it signals a broken metric, the
    honest algorithm terminates).
    """
    m = metric.mesh
    lengths = metric.lengths
    if max_flips is None:
        max_flips = 50 * m.n_edges
    report = FlipReport()
    interior = [e for e in range(m.n_edges)
                if m.he_face[m.he_twin[m.edge_he[e]]] >= 0]
    queue = deque(interior)
    queued = set(interior)
    while queue:
        e = queue.popleft()
        queued.discard(e)
        h = m.edge_he[e]
        t = m.he_twin[h]
        if m.he_face[h] < 0 or m.he_face[t] < 0:
            continue
        ang_sum, _, cross = _flip_geometry(m, lengths, e)
        if ang_sum <= np.pi + DELAUNAY_SLACK:
            continue
        if not 0.0 < cross < 1.0:
            raise DegenerateTriangle(
                f"edge {e}: non-Delaunay but quad not convex, metric is degenerate")
        if m.he_origin[m.he_next[m.he_next[h]]] == m.he_origin[m.he_next[m.he_next[t]]]:
            # Opposite corners coincide (two faces glued along two edges);
            # such an edge cannot flip, and on a valid metric it is never
            # non-Delaunay unless the mesh is too coarse to flatten.
            raise NonFlippable(
                f"edge {e} is non-Delaunay but flips onto a loop; refine the mesh")
        flip_edge(m, lengths, e)
        report.n_flips += 1
        report.flipped.append(int(e))
        if report.n_flips > max_flips:
            raise NoConvergence(
                f"exceeded flip budget {max_flips}; metric is likely degenerate")
        h = m.edge_he[e]
        t = m.he_twin[h]
        for rim in (m.he_next[h], m.he_next[m.he_next[h]],
                    m.he_next[t], m.he_next[m.he_next[t]]):
            re_ = int(m.he_edge[rim])
            if re_ not in queued:
                queue.append(re_)
                queued.add(re_)
    return report
