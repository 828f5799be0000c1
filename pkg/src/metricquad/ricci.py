"""Curvature prescription by conformal vertex scaling.

Lengths move inside the family l_ij(u) = exp(u_i) l_ij exp(u_j). The map
u -> K has symmetric Jacobian equal to the unhalved cotangent matrix C
(C_ij = -sum of cotangents opposite edge ij, rows summing to zero), so
K - Kbar is the gradient of a potential

    F(u) = int_0^u sum_i (K_i - Kbar_i) dv_i,

which is convex on Delaunay triangulations. Newton steps on F with
backtracking and intrinsic flips after every accepted step drive K to Kbar;
flips keep Hess F positive semidefinite and do not change the metric, so F
stays well defined across them (it is C1 there).

The public energy is E = -F, so its finite differences match the reported
gradient Kbar - K directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .delaunay import intrinsic_delaunay
from .errors import DegenerateTriangle, NoConvergence
from .mesh import TriangleMesh
from .metric import ConeMetric, corner_angles, target_curvature, vertex_curvature
from .prescription import SingularityPrescription, validate_prescription

GAUSS_LEGENDRE_ORDER = 8


def _as_kbar(mesh: TriangleMesh, prescription) -> np.ndarray:
    if isinstance(prescription, SingularityPrescription):
        verdict = validate_prescription(mesh, prescription)
        if verdict.total_index != verdict.required_index:
            raise ValueError(
                f"prescription index sum {verdict.total_index} != 4*chi = "
                f"{verdict.required_index}; no flat metric exists")
        kbar = target_curvature(mesh, prescription)
    else:
        kbar = np.asarray(prescription, dtype=float)
    if kbar.shape != (mesh.n_vertices,):
        raise ValueError(f"expected {mesh.n_vertices} target curvatures")
    expect = 2.0 * np.pi * mesh.euler_characteristic
    if abs(kbar.sum() - expect) > 1e-8:
        raise ValueError(
            f"target curvature sums to {kbar.sum():.6f}, needs 2*pi*chi = {expect:.6f}")
    # Cone angles 2*pi - kbar (interior) and pi - kbar (boundary) must stay
    # positive, otherwise no metric realizes the target.
    full = np.where(mesh.is_boundary_vertex, np.pi, 2.0 * np.pi)
    if np.any(kbar >= full - 1e-12):
        v = int(np.argmax(kbar - full))
        raise ValueError(f"target curvature at vertex {v} leaves no cone angle")
    return kbar


def _scaled_lengths(mesh: TriangleMesh, lengths0: np.ndarray, u: np.ndarray) -> np.ndarray:
    a, b = mesh.edge_endpoint_arrays()
    return lengths0 * np.exp(u[a] + u[b])


def curvature_jacobian(metric: ConeMetric, angles: np.ndarray | None = None) -> sp.csr_matrix:
    """dK/du as a sparse matrix: the cotangent matrix without the 1/2.

    Row i: C_ii = sum_j w_ij, C_ij = -w_ij with w_ij the sum of cotangents
    of the angles opposite edge ij. Positive semidefinite whenever the
    triangulation is Delaunay, with kernel the constants.
    """
    m = metric.mesh
    if angles is None:
        angles = corner_angles(metric)
    w = np.zeros(m.n_edges)
    he = np.arange(m.n_interior_halfedges)
    np.add.at(w, m.he_edge[he], 1.0 / np.tan(angles))
    a, b = m.edge_endpoint_arrays()
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([w, w, -w, -w])
    n = m.n_vertices
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _segment_energy(mesh, lengths0, kbar, u_from, du, order=GAUSS_LEGENDRE_ORDER):
    """int_0^1 (K(u_from + s du) - kbar) . du ds by Gauss-Legendre.

    Evaluated on the fixed current triangulation; exact up to quadrature
    error because the integrand is analytic in s between flips.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for x, w in zip(nodes, weights):
        s = 0.5 * (x + 1.0)
        lens = _scaled_lengths(mesh, lengths0, u_from + s * du)
        K = vertex_curvature(ConeMetric(mesh, lens))
        total += 0.5 * w * float((K - kbar) @ du)
    return total


def ricci_energy_gradient(metric: ConeMetric, u: np.ndarray, prescription,
                          order: int = GAUSS_LEGENDRE_ORDER):
    """Energy and gradient of the scaling flow at conformal factors u.

    Returns (E, g) with g = Kbar - K(u) and E the line integral of g from
    the metric's own lengths (u = 0) to u, so dE/du_i == g_i holds exactly
    and finite differences of E reproduce g. The triangulation is taken as
    given; no flips happen here.
    """
    m = metric.mesh
    kbar = _as_kbar(m, prescription)
    u = np.asarray(u, dtype=float)
    E = -_segment_energy(m, metric.lengths, kbar, np.zeros(m.n_vertices), u,
                         order=order)
    K = vertex_curvature(ConeMetric(m, _scaled_lengths(m, metric.lengths, u)))
    return E, kbar - K


@dataclass
class RicciReport:
    converged: bool = False
    n_iterations: int = 0
    n_flips: int = 0
    final_residual: float = np.inf
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "converged": self.converged,
            "nIterations": self.n_iterations,
            "nFlips": self.n_flips,
            "finalResidual": self.final_residual,
            "energyTrace": list(self.energy_trace),
            "residualTrace": list(self.residual_trace),
        }


def _newton_direction(C: sp.csr_matrix, r: np.ndarray, pin: int) -> np.ndarray:
    """Solve C d = -r with one vertex pinned to kill the constant kernel."""
    n = C.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[pin] = False
    C_red = C[keep][:, keep].tocsc()
    d = np.zeros(n)
    d[keep] = spla.spsolve(C_red, -r[keep])
    if not np.all(np.isfinite(d)):
        raise NoConvergence("curvature Jacobian is singular beyond its constant kernel")
    return d


def ricci_flow(metric: ConeMetric, prescription, tol: float = 1e-10,
               max_iter: int = 50, verbose: bool = False) -> RicciReport:
    """Deform metric in place until vertex curvatures hit their targets.

    Mutates both metric.lengths and metric.mesh (intrinsic flips). The
    returned report carries the accumulated potential trace, which is
    non-increasing, and the sup-norm curvature residual per iteration.
    Raises NoConvergence after max_iter Newton steps above tol.
    """
    mesh = metric.mesh
    kbar = _as_kbar(mesh, prescription)
    report = RicciReport()
    report.n_flips += intrinsic_delaunay(metric).n_flips

    u = np.zeros(mesh.n_vertices)
    F = 0.0
    report.energy_trace.append(F)
    pin = 0

    for it in range(max_iter):
        angles = corner_angles(metric)
        K = vertex_curvature(metric, angles)
        r = K - kbar
        res = float(np.abs(r).max())
        report.residual_trace.append(res)
        if verbose:
            print(f"  ricci iter {it}: residual {res:.3e}")
        if res <= tol:
            report.converged = True
            report.n_iterations = it
            report.final_residual = res
            return report

        C = curvature_jacobian(metric, angles)
        d = _newton_direction(C, r, pin)
        slope = float(r @ d)
        if slope >= 0.0:
            d = -r
            slope = float(r @ d)

        lengths0 = metric.lengths.copy()
        base = np.zeros(mesh.n_vertices)
        step = 1.0
        accepted = False
        for _ in range(30):
            du = step * d
            trial = _scaled_lengths(mesh, lengths0, du)
            try:
                corner_angles(ConeMetric(mesh, trial))
            except DegenerateTriangle:
                step *= 0.5
                continue
            dF = _segment_energy(mesh, lengths0, kbar, base, du)
            if dF <= 1e-4 * step * slope or abs(dF) < 1e-15 * max(1.0, abs(F)):
                metric.lengths[:] = trial
                u += du
                F += dF
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NoConvergence(
                f"line search failed at iteration {it}, residual {res:.3e}")

        report.energy_trace.append(F)
        report.n_flips += intrinsic_delaunay(metric).n_flips

        # Recenter so lengths stay O(1); a constant shift scales the metric
        # globally and leaves both K and F unchanged (sum r = 0).
        shift = float(u.mean())
        if shift != 0.0:
            metric.lengths *= np.exp(-2.0 * shift)
            u -= shift

    angles = corner_angles(metric)
    K = vertex_curvature(metric, angles)
    res = float(np.abs(K - kbar).max())
    report.residual_trace.append(res)
    report.final_residual = res
    report.n_iterations = max_iter
    if res <= tol:
        report.converged = True
        return report
    raise NoConvergence(
        f"curvature residual {res:.3e} above {tol:.1e} after {max_iter} iterations")
