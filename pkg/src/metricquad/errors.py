"""Exception taxonomy for the metricquad pipeline.

Every stage raises a subclass of MetricQuadError so the pipeline and the HTTP
service can map failures to structured payloads without string matching.
"""

from __future__ import annotations


class MetricQuadError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# mesh construction and file parsing


class MeshError(MetricQuadError):
    pass


class ParseError(MeshError):
    """Malformed OFF/OBJ input."""


class NonTriangleFace(ParseError):
    """Input face with a vertex count other than three."""


class NonManifold(MeshError):
    """Edge with more than two incident faces, inconsistent winding, or a
    vertex whose star is not a disk/half-disk."""


class DisconnectedMesh(MeshError):
    """More than one connected component."""


class UnknownVertex(MeshError):
    """Prescription references a vertex id outside the mesh."""


# ---------------------------------------------------------------------------
# metric / curvature / flow


class MetricError(MetricQuadError):
    pass


class DegenerateTriangle(MetricError):
    """Triangle inequality violated or a non-positive edge length."""


class DegenerateMetric(MetricError):
    """A whole metric (scaled lengths) contains degenerate triangles."""


class NonFlippable(MetricError):
    """Intrinsic Delaunay iteration exceeded its flip budget."""


class GaussBonnetViolation(MetricError):
    """Prescribed indices do not sum to 4*chi."""

    def __init__(self, message: str, residual: int = 0):
        super().__init__(message)
        self.residual = residual


class NoConvergence(MetricError):
    """Newton iteration exhausted maxIter above tolerance."""


# ---------------------------------------------------------------------------
# cutting / slicing / immersion


class CutError(MetricQuadError):
    pass


class InvalidCut(CutError):
    """Slicing did not produce a single disk."""


class ImmersionError(MetricQuadError):
    pass


class NotFlat(ImmersionError):
    """Interior curvature residual too large to lay out."""


class DegenerateSegment(ImmersionError):
    """Segment with a zero-length chord; no rigid motion is recoverable."""


# ---------------------------------------------------------------------------
# holonomy / deformation


class DeformError(MetricQuadError):
    pass


class SnapInfeasible(DeformError):
    """A pairing rotation lies further than tolSnap from every k*pi/2."""

    def __init__(self, message: str, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders or [])


class SingularSystem(DeformError):
    """Constrained solve is rank-deficient beyond the fixed gauge."""


class FoldoverPresent(DeformError):
    """Operation requires an injective deformation but folded faces exist."""

    def __init__(self, message: str, faces=None):
        super().__init__(message)
        self.faces = list(faces or [])


class CopyMismatch(DeformError):
    """The two copies of a cut edge disagree in deformed length."""


# ---------------------------------------------------------------------------
# tracing / skeleton / quantization


class TraceError(MetricQuadError):
    pass


class StartOnVertex(TraceError):
    """Trace anchor coincides with a mesh vertex."""


class InfiniteSeparatrix(TraceError):
    """Separatrix exhausted the length budget without terminating."""

    def __init__(self, message: str, rays=None):
        super().__init__(message)
        self.rays = list(rays or [])


class SkeletonError(MetricQuadError):
    pass


class NonRectangularPatch(SkeletonError):
    """A skeleton patch fails the four-right-corners/equal-sides checks."""


class OverlappingSeparatrices(SkeletonError):
    """Two separatrices share a positive-length sub-arc."""


class QuantizeError(MetricQuadError):
    pass


class QuantizationInfeasible(QuantizeError):
    """Opposite-side counts cannot be reconciled within the repair budget."""


class TooCoarse(QuantizeError):
    """Target edge length exceeds twice the shortest skeleton arc."""


class NonQuadFace(MetricQuadError):
    """Quad-mesh container fed a face that is not a quadrilateral."""


# ---------------------------------------------------------------------------
# pipeline / server


class PipelineError(MetricQuadError):
    pass


class UnknownStage(PipelineError):
    pass


class StageFailure(PipelineError):
    """A stage raised; artifacts of the completed stages are retained."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


class BindError(PipelineError):
    """Service could not bind its address."""


class SessionLimitExceeded(MetricQuadError):
    pass
