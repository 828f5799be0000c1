"""Semi-regular quad meshing through flat cone metrics.

A triangle mesh plus an integer singularity prescription is flattened by
a curvature-prescribing conformal flow, cut open and immersed in the
plane, nudged so all transition rotations are exact quarter turns, and
finally carved into rectangular patches by geodesics shot from the cones;
quantizing the patch sides yields a conforming all-quad mesh.
"""

from .cut import CutGraph, SlicedMesh, build_cut_graph, slice_along
from .deform import (CrossField, Deformation, build_cross_field,
                     induced_metric, snap_and_solve)
from .delaunay import FlipReport, intrinsic_delaunay
from .errors import *  # noqa: F401,F403  (error taxonomy is the public surface)
from .holonomy import (HolonomyReport, check_holonomy_condition,
                       holonomy_signature)
from .immersion import Immersion, SegmentPairing, immerse, segment_pairings
from .mesh import TriangleMesh, TopologyReport, topology_report
from .meshio import load_mesh, obj_quads, obj_with_corner_uvs, save_off
from .metric import (ConeMetric, check_gauss_bonnet, corner_angles,
                     metric_from_embedding, target_curvature,
                     vertex_curvature)
from .models import BundledModel, bundled_model, bundled_names
from .pipeline import (PipelineArtifacts, PipelineConfig, check_holonomy,
                       run_pipeline)
from .prescription import (PrescriptionVerdict, SingularityPrescription,
                           validate_prescription)
from .quadmesh import (QuadMesh, QualityReport, quad_quality,
                       quantize_and_subdivide, quantize_counts)
from .ricci import RicciReport, ricci_energy_gradient, ricci_flow
from .skeleton import Skeleton, SkeletonArc, SkeletonNode, SkeletonPatch, \
    build_skeleton
from .tracing import Separatrix, Trace, trace_geodesic, trace_separatrices

__version__ = "0.1.0"
