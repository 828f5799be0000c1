"""Seamless deformation of the immersed disk.

The immersion is isometric but its seam rotations and boundary directions
are only approximately quarter-turns; tracing a grid through it would
drift. The deformation snaps them exact: minimize

    E(z) = sum_e w_e |(z_i - z_j) - (phi_i - phi_j)|^2

over new positions z (phi the immersion, w the planar cotangent weights)
subject to
  * seam pairs: z_minus = R_k z_plus + t_s, with R_k the exact quarter
    rotation nearest the measured pairing angle and t_s free per segment;
  * boundary arcs: every vertex of an arc lies on one axis line, the
    offset free per arc, the axis picked by snapping the immersed chord;
  * one pinned vertex, killing the translation kernel.

Solved as one sparse KKT system. When the immersion already satisfies all
constraints it is feasible with E = 0, so z = phi is returned unchanged.
Interior vertices stay discretely harmonic because the planar cotangent
operator annihilates the identity map of each flat chart.

The induced metric |z_i - z_j| then lives on the original mesh again: the
two copies of a cut edge agree exactly (seam motions are rigid), cone
angles become exact quarter multiples, and the per-face pullback of the
image axes is a smooth cross field across all seams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cut import SlicedMesh
from .errors import CopyMismatch, FoldoverPresent, SingularSystem, SnapInfeasible
from .immersion import Immersion
from .metric import ConeMetric, corner_angles
from .holonomy import QUARTER, face_chart_corners, quarter_residual, wrap_angle

TOL_SNAP = 0.35

# exact quarter rotations as (cos, sin)
_ROT = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


@dataclass
class SnappedSeam:
    segment: int
    quarter_turns: int       # k with rotation snapped to k*pi/2
    residual: float          # measured angle minus snapped angle
    pairs: list              # (plus, minus) sliced vertex ids
    translation: complex = 0j

    def to_dict(self):
        return {"segment": self.segment, "quarterTurns": self.quarter_turns,
                "residual": self.residual,
                "translation": [self.translation.real, self.translation.imag]}


@dataclass
class AlignedArc:
    arc: int
    vertices: list           # sliced vertex ids along the arc
    axis: str                # "h": constant y, "v": constant x
    residual: float          # chord angle minus snapped axis direction
    offset: float = 0.0
    closed: bool = False

    def to_dict(self):
        return {"arc": self.arc, "vertices": list(map(int, self.vertices)),
                "axis": self.axis, "residual": self.residual,
                "offset": self.offset, "closed": self.closed}


@dataclass
class Deformation:
    sliced: SlicedMesh
    z: np.ndarray            # complex positions per sliced vertex
    seams: list
    arcs: list
    energy: float
    folded_faces: list = field(default_factory=list)
    constraint_error: float = 0.0

    def to_dict(self):
        return {
            "energy": self.energy,
            "constraintError": self.constraint_error,
            "foldedFaces": list(map(int, self.folded_faces)),
            "seams": [s.to_dict() for s in self.seams],
            "arcs": [a.to_dict() for a in self.arcs],
        }


def rotate_deformation(deformation: Deformation, rot: complex) -> Deformation:
    """Rigidly rotate a deformation in the plane, in place.

    Seam constraints survive any rotation (quarter turns commute with it),
    so this is only legitimate while no arc pins the frame: rot must be a
    quarter turn when arcs are present, anything on the unit circle else.
    """
    deformation.z = deformation.z * rot
    for s in deformation.seams:
        s.translation = s.translation * rot
    return deformation


def lattice_frame_candidates(deformation: Deformation, prescription,
                             max_candidates: int = 6) -> list:
    """Rotation angles that could bring the closed-surface frame onto the
    field lattice, best guesses first, each in (-pi/4, pi/4].

    On a closed surface all cone images (every sliced copy) sit on one
    square lattice; the shortest difference vectors between copies are
    short lattice vectors, so their directions mod a quarter turn are the
    strongest frame evidence. Seam translations are weaker evidence: they
    are lattice vectors too, but of arbitrary integer slope, which is why
    a circular mean over them can point anywhere. Callers should verify a
    candidate by probing the separatrix trace.
    """
    sliced = deformation.sliced
    z = deformation.z
    copies = []
    for v, k in prescription:
        if k != 0:
            copies.extend(int(c) for c in sliced.copies_of(v))
    pts = np.asarray([z[c] for c in copies])
    if len(pts) < 2:
        return []
    diffs = (pts[None, :] - pts[:, None]).ravel()
    mags = np.abs(diffs)
    scale = float(mags.max()) if len(mags) else 0.0
    keep = mags > 1e-9 * max(scale, 1.0)
    diffs, mags = diffs[keep], mags[keep]
    if not len(diffs):
        return []
    order = np.argsort(mags)
    out = []
    for i in order:
        a = float(np.angle(diffs[i])) % (np.pi / 2.0)
        rot = -a if a <= np.pi / 4.0 else np.pi / 2.0 - a
        if any(abs(rot - r) <= 1e-7 for r in out):
            continue
        out.append(rot)
        if len(out) >= max_candidates:
            break
    return out


def boundary_arcs(sliced: SlicedMesh, prescription) -> list:
    """Split the sliced boundary into original-boundary runs.

    Walks the single boundary loop; edges that were boundary before the
    cut form maximal runs, additionally split at singular vertices. A loop
    that is entirely original boundary with no corner on it comes back as
    one closed arc (a straight closed geodesic, e.g. a flat cylinder rim).
    """
    m = sliced.mesh
    orig = sliced.original
    singular = {v for v, k in prescription if k != 0}

    n_int = m.n_interior_halfedges
    arcs = []
    visited = np.zeros(m.n_halfedges - n_int, dtype=bool)
    for b0 in range(n_int, m.n_halfedges):
        if visited[b0 - n_int]:
            continue
        loop = []
        b = b0
        while not visited[b - n_int]:
            visited[b - n_int] = True
            loop.append(b)
            b = int(m.he_next[b])

        def is_orig(bh):
            h = int(m.he_twin[bh])
            return orig.he_face[orig.he_twin[h]] < 0

        def splits_at(v):
            return int(sliced.vertex_origin[v]) in singular

        flags = [is_orig(bh) for bh in loop]
        if all(flags) and not any(splits_at(int(m.he_origin[bh])) for bh in loop):
            verts = [int(m.he_origin[bh]) for bh in loop]
            arcs.append((verts + [verts[0]], True))
            continue
        n = len(loop)
        starts = [i for i in range(n)
                  if flags[i] and (not flags[i - 1] or splits_at(int(m.he_origin[loop[i]])))]
        for i0 in starts:
            verts = [int(m.he_origin[loop[i0]])]
            i = i0
            while flags[i % n]:
                verts.append(int(m.he_origin[loop[(i + 1) % n]]))
                i += 1
                if splits_at(verts[-1]) or (i - i0) >= n:
                    break
            arcs.append((verts, False))
    return arcs


def _snap_axis(chord: complex):
    """('h'|'v', signed residual) for a chord; ties go horizontal."""
    theta = float(np.angle(chord)) % np.pi
    d_h = min(theta, np.pi - theta)
    d_v = abs(theta - np.pi / 2.0)
    if d_h <= d_v:
        return "h", d_h
    return "v", d_v


def snap_and_solve(immersion: Immersion, sliced: SlicedMesh, pairings,
                   prescription, tol_snap: float = TOL_SNAP,
                   allow_foldovers: bool = False) -> Deformation:
    """Snap seam rotations and boundary axes, then solve the KKT system.

    Raises SnapInfeasible when any seam rotation or arc chord is farther
    than tol_snap from its nearest quarter target (offenders listed), and
    FoldoverPresent when the solution inverts faces (unless allowed).
    """
    m = sliced.mesh
    phi = immersion.z
    scale = immersion.bbox_diag

    raw_arcs = boundary_arcs(sliced, prescription)

    # The development frame is arbitrary (seeded by one edge), so the
    # axis gauge is ours to pick: rotate so the boundary chords sit
    # nearest the axes collectively. Seam rotations are gauge invariant.
    w = 0j
    for verts, closed in raw_arcs:
        chord = phi[verts[1] if closed else verts[-1]] - phi[verts[0]]
        w += abs(chord) * np.exp(4j * np.angle(chord))
    if abs(w) > 1e-12 * scale:
        phi = phi * np.exp(-0.25j * np.angle(w))

    seams, offenders = [], []
    for p in pairings:
        a = float(wrap_angle(p.rotation))
        res = float(quarter_residual(a))
        k = int(np.round(a / QUARTER)) % 4
        if abs(res) > tol_snap:
            offenders.append(("segment", p.segment, res))
        pairs, seen = [], set()
        for pv, mv in zip(p.plus_vertices, p.minus_vertices):
            if (pv, mv) not in seen:
                seen.add((pv, mv))
                pairs.append((int(pv), int(mv)))
        seams.append(SnappedSeam(segment=p.segment, quarter_turns=k,
                                 residual=res, pairs=pairs))

    arcs = []
    for i, (verts, closed) in enumerate(raw_arcs):
        if closed:
            chord = phi[verts[1]] - phi[verts[0]]
        else:
            chord = phi[verts[-1]] - phi[verts[0]]
        if abs(chord) < 1e-14 * scale:
            chord = phi[verts[1]] - phi[verts[0]]
        axis, res = _snap_axis(chord)
        if abs(res) > tol_snap:
            offenders.append(("arc", i, res))
        uniq = verts[:-1] if closed else verts
        arcs.append(AlignedArc(arc=i, vertices=list(dict.fromkeys(uniq)),
                               axis=axis, residual=res, closed=closed))
    if offenders:
        raise SnapInfeasible(
            "rotational drift exceeds the snap tolerance "
            f"{tol_snap}: {offenders}", offenders=offenders)

    V = m.n_vertices
    S = len(seams)
    R = len(arcs)
    n_x = 2 * V + 2 * S + R

    L = _planar_cotan_matrix(sliced.metric)

    rows, cols, vals, rhs = [], [], [], []

    def add_row(entries, b):
        r = len(rhs)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(b)

    for si, seam in enumerate(seams):
        ck, sk = _ROT[seam.quarter_turns]
        tx, ty = 2 * V + 2 * si, 2 * V + 2 * si + 1
        for (pv, mv) in seam.pairs:
            add_row([(2 * mv, 1.0), (2 * pv, -ck), (2 * pv + 1, sk), (tx, -1.0)], 0.0)
            add_row([(2 * mv + 1, 1.0), (2 * pv, -sk), (2 * pv + 1, -ck), (ty, -1.0)], 0.0)
    for ai, arc in enumerate(arcs):
        coord = 1 if arc.axis == "h" else 0
        cc = 2 * V + 2 * S + ai
        for v in arc.vertices:
            add_row([(2 * v + coord, 1.0), (cc, -1.0)], 0.0)
    pin = 0
    add_row([(2 * pin, 1.0)], float(phi[pin].real))
    add_row([(2 * pin + 1, 1.0)], float(phi[pin].imag))

    n_c = len(rhs)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n_c, n_x)).tocsr()

    L2 = sp.kron(L, sp.eye(2), format="csr")
    H = sp.block_diag([2.0 * L2, sp.csr_matrix((2 * S + R, 2 * S + R))],
                      format="csr")
    phi_flat = np.empty(2 * V)
    phi_flat[0::2] = phi.real
    phi_flat[1::2] = phi.imag
    g = np.zeros(n_x)
    g[:2 * V] = 2.0 * (L2 @ phi_flat)

    KKT = sp.bmat([[H, A.T], [A, None]], format="csc")
    rhs_full = np.concatenate([g, np.array(rhs)])
    sol = spla.spsolve(KKT, rhs_full)
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("KKT solve produced non-finite values")
    x = sol[:n_x]
    cons_err = float(np.max(np.abs(A @ x - np.array(rhs)))) if n_c else 0.0
    if cons_err > 1e-6 * (1.0 + scale):
        raise SingularSystem(
            f"constraints violated by {cons_err:.3e}; system is rank deficient")

    z = x[0:2 * V:2] + 1j * x[1:2 * V + 1:2]
    for si, seam in enumerate(seams):
        seam.translation = complex(x[2 * V + 2 * si], x[2 * V + 2 * si + 1])
    for ai, arc in enumerate(arcs):
        arc.offset = float(x[2 * V + 2 * S + ai])

    d_z = _edge_differences(m, z)
    d_phi = _edge_differences(m, phi)
    w = _edge_cotan_weights(sliced.metric)
    energy = float(np.sum(w * np.abs(d_z - d_phi) ** 2))

    if not arcs and seams:
        # Closed surface: no arc pins the frame, and the energy term just
        # inherits the arbitrary immersion seed. Quarter rotations commute
        # with any global rotation, so rotating z (and the translations)
        # keeps every seam exact; pick the angle that brings the seam
        # translation lattice onto the axes (4-fold circular mean).
        wsum = sum(abs(s.translation) * np.exp(4j * np.angle(s.translation))
                   for s in seams if abs(s.translation) > 1e-12 * scale)
        if abs(wsum) > 1e-12 * scale:
            rot = np.exp(-0.25j * np.angle(wsum))
            z = z * rot
            for seam in seams:
                seam.translation = seam.translation * rot

    folded = _folded_faces(m, z, scale)
    if folded and not allow_foldovers:
        raise FoldoverPresent(
            f"{len(folded)} inverted faces after deformation", faces=folded)

    return Deformation(sliced=sliced, z=z, seams=seams, arcs=arcs,
                       energy=energy, folded_faces=folded,
                       constraint_error=cons_err)


def _edge_differences(mesh, z):
    a, b = mesh.edge_endpoint_arrays()
    return z[b] - z[a]


def _edge_cotan_weights(metric: ConeMetric) -> np.ndarray:
    m = metric.mesh
    ang = corner_angles(metric)
    w = np.zeros(m.n_edges)
    he = np.arange(m.n_interior_halfedges)
    np.add.at(w, m.he_edge[he], 0.5 / np.tan(ang))
    return w


def _planar_cotan_matrix(metric: ConeMetric) -> sp.csr_matrix:
    m = metric.mesh
    w = _edge_cotan_weights(metric)
    a, b = m.edge_endpoint_arrays()
    n = m.n_vertices
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([w, w, -w, -w])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _folded_faces(mesh, z, scale) -> list:
    za = z[mesh.faces[:, 0]]
    zb = z[mesh.faces[:, 1]]
    zc = z[mesh.faces[:, 2]]
    area2 = np.imag(np.conj(zb - za) * (zc - za))
    return np.nonzero(area2 <= 1e-14 * scale * scale)[0].tolist()


def induced_metric(deformation: Deformation, rel_tol: float = 1e-7) -> ConeMetric:
    """Image edge lengths pushed back onto the original mesh.

    Each original edge has one or two sliced copies; the copies' image
    lengths must agree to rel_tol (they are related by exact rigid seam
    motions, so disagreement means the solve went wrong) and their mean is
    used. Raises CopyMismatch on disagreement.
    """
    sliced = deformation.sliced
    m, orig = sliced.mesh, sliced.original
    z = deformation.z

    sums = np.zeros(orig.n_edges)
    counts = np.zeros(orig.n_edges, dtype=int)
    mins = np.full(orig.n_edges, np.inf)
    maxs = np.zeros(orig.n_edges)
    for h in range(0, m.n_interior_halfedges):
        e_new = int(m.he_edge[h])
        if m.edge_he[e_new] != h:
            continue
        e_old = int(orig.he_edge[h])
        ln = abs(z[m.he_origin[h]] - z[m.halfedge_dest(h)])
        sums[e_old] += ln
        counts[e_old] += 1
        mins[e_old] = min(mins[e_old], ln)
        maxs[e_old] = max(maxs[e_old], ln)

    if np.any(counts == 0):
        raise CopyMismatch("some original edges have no sliced copy")
    spread = (maxs - mins) / np.maximum(maxs, 1e-300)
    if spread.max() > rel_tol:
        e = int(np.argmax(spread))
        raise CopyMismatch(
            f"edge {e}: cut copies disagree by {spread[e]:.3e} (> {rel_tol:.1e})")
    return ConeMetric(orig, sums / counts)


@dataclass
class CrossField:
    """Quarter-symmetric direction field: the image axes seen per face.

    angles[f] is the direction of the image's horizontal axis expressed in
    face f's canonical chart, reduced mod pi/2 into [0, pi/2). Crossing any
    interior edge, the angle transforms by the chart transition rotation
    mod pi/2; seams contribute exact quarter turns, so the field is smooth
    everywhere away from cones.
    """

    metric: ConeMetric
    angles: np.ndarray

    def direction(self, f: int, branch: int = 0) -> float:
        return float(self.angles[f] + branch * QUARTER)

    def to_dict(self):
        return {"angles": [float(a) for a in self.angles]}


def build_cross_field(deformation: Deformation, induced: ConeMetric) -> CrossField:
    """Pull the image horizontal axis back into every face chart.

    The image of face f is congruent to its induced chart triangle, so the
    chart-to-image map is a rotation; the horizontal axis pulls back to
    minus that rotation angle, reduced mod pi/2.
    """
    sliced = deformation.sliced
    m = sliced.mesh
    z = deformation.z
    F = m.n_faces
    angles = np.empty(F)
    corners = face_chart_corners(induced)
    for f in range(F):
        h = 3 * f
        img = z[m.halfedge_dest(h)] - z[int(m.he_origin[h])]
        ref = corners[f, 1] - corners[f, 0]
        rot = float(np.angle(img / ref))
        angles[f] = (-rot) % QUARTER
    return CrossField(metric=induced, angles=angles)
