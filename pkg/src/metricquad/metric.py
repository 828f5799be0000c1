"""Discrete metrics: positive edge lengths with triangle-inequality slack.

A ConeMetric stores one length per edge. Corner angles come from the law of
cosines; vertex curvature is the angle defect, 2*pi - sum at interior
vertices and pi - sum on the boundary. Vertex scaling enters through
conformal factors u: l_ij = exp(u_i) * beta_ij * exp(u_j), with beta the
scale-free part kept by the Ricci flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriangle, GaussBonnetViolation
from .mesh import TriangleMesh


@dataclass
class ConeMetric:
    """Edge lengths on a fixed triangulation."""

    mesh: TriangleMesh
    lengths: np.ndarray

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=float)
        if self.lengths.shape != (self.mesh.n_edges,):
            raise ValueError(
                f"expected {self.mesh.n_edges} edge lengths, got {self.lengths.shape}")
        if not np.all(np.isfinite(self.lengths)) or np.any(self.lengths <= 0):
            raise DegenerateTriangle("edge lengths must be finite and positive")

    def copy(self):
        return ConeMetric(self.mesh, self.lengths.copy())

    def halfedge_lengths(self):
        """Length per interior halfedge, indexed like the face corner arrays."""
        m = self.mesh
        return self.lengths[m.he_edge[:m.n_interior_halfedges]]

    def to_dict(self):
        return {"lengths": [repr(float(x)) for x in self.lengths]}

    @classmethod
    def from_dict(cls, mesh, data):
        return cls(mesh, np.array([float(x) for x in data["lengths"]]))


def metric_from_embedding(mesh: TriangleMesh) -> ConeMetric:
    """Euclidean edge lengths of the vertex positions."""
    a, b = mesh.edge_endpoint_arrays()
    lengths = np.linalg.norm(mesh.positions[a] - mesh.positions[b], axis=1)
    return ConeMetric(mesh, lengths)


def corner_angles(metric: ConeMetric, strict: bool = True) -> np.ndarray:
    """Angle at the corner opposite each interior halfedge.

    Halfedge h of face f = h // 3 runs along the side of length l_h; the
    angle returned at slot h sits at the vertex *opposite* that side, which
    is dest(next(h)). The law of cosines argument is clipped to [-1, 1], so
    triangle-inequality violations flatten to angles {0, pi} instead of NaN;
    with strict=True such faces raise DegenerateTriangle.
    """
    m = metric.mesh
    lh = metric.halfedge_lengths().reshape(-1, 3)
    la, lb, lc = lh[:, 0], lh[:, 1], lh[:, 2]

    def angle(opp, s1, s2):
        c = (s1 ** 2 + s2 ** 2 - opp ** 2) / (2.0 * s1 * s2)
        return np.arccos(np.clip(c, -1.0, 1.0))

    ang = np.empty_like(lh)
    ang[:, 0] = angle(la, lb, lc)
    ang[:, 1] = angle(lb, lc, la)
    ang[:, 2] = angle(lc, la, lb)
    if strict:
        bad = np.abs(ang.sum(axis=1) - np.pi) > 1e-9
        if np.any(bad):
            f = int(np.nonzero(bad)[0][0])
            raise DegenerateTriangle(
                f"face {f} violates the triangle inequality: lengths {lh[f].tolist()}")
    return ang.ravel()


def face_areas(metric: ConeMetric) -> np.ndarray:
    """Metric triangle areas (Heron, numerically stable form)."""
    lh = np.sort(metric.halfedge_lengths().reshape(-1, 3), axis=1)
    a, b, c = lh[:, 2], lh[:, 1], lh[:, 0]  # a >= b >= c
    s = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(s, 0.0))


def total_area(metric: ConeMetric) -> float:
    return float(face_areas(metric).sum())


def angle_vertex_slots(mesh: TriangleMesh) -> np.ndarray:
    """Vertex that owns the angle of each interior halfedge slot."""
    nxt = mesh.he_next[:mesh.n_interior_halfedges]
    return mesh.he_origin[mesh.he_next[nxt]]


def vertex_angle_sums(metric: ConeMetric, angles: np.ndarray | None = None) -> np.ndarray:
    m = metric.mesh
    if angles is None:
        angles = corner_angles(metric)
    sums = np.zeros(m.n_vertices)
    np.add.at(sums, angle_vertex_slots(m), angles)
    return sums


def vertex_curvature(metric: ConeMetric, angles: np.ndarray | None = None) -> np.ndarray:
    """Angle defect: 2*pi - sum interior, pi - sum on the boundary."""
    m = metric.mesh
    sums = vertex_angle_sums(metric, angles)
    full = np.where(m.is_boundary_vertex, np.pi, 2.0 * np.pi)
    return full - sums


def target_curvature(mesh: TriangleMesh, prescription) -> np.ndarray:
    """k*pi/2 at prescribed vertices, zero elsewhere."""
    kbar = np.zeros(mesh.n_vertices)
    for v, k in prescription:
        kbar[v] = k * np.pi / 2.0
    return kbar


def check_gauss_bonnet(metric: ConeMetric, tol: float = 1e-8) -> float:
    """Return sum(K) - 2*pi*chi; raise if it exceeds tol."""
    total = float(vertex_curvature(metric).sum())
    expect = 2.0 * np.pi * metric.mesh.euler_characteristic
    residual = total - expect
    if abs(residual) > tol:
        raise GaussBonnetViolation(residual)
    return residual


@dataclass
class ScaledMetric:
    """Conformal family l_ij(u) = exp(u_i) * beta_ij * exp(u_j).

    beta is frozen at construction from a reference metric with u = 0;
    interchanging u updates and intrinsic flips both preserve this form.
    """

    mesh: TriangleMesh
    beta: np.ndarray
    u: np.ndarray = field(default=None)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.u is None:
            self.u = np.zeros(self.mesh.n_vertices)
        self.u = np.asarray(self.u, dtype=float)

    @classmethod
    def from_metric(cls, metric: ConeMetric):
        return cls(metric.mesh, metric.lengths.copy())

    def lengths(self, u: np.ndarray | None = None) -> np.ndarray:
        if u is None:
            u = self.u
        a, b = self.mesh.edge_endpoint_arrays()
        return np.exp(u[a]) * self.beta * np.exp(u[b])

    def metric(self, u: np.ndarray | None = None) -> ConeMetric:
        return ConeMetric(self.mesh, self.lengths(u))
