"""Staged pipeline from a triangle mesh to a quantized quad mesh.

Stages run in a fixed order, fail fast, and write one JSON artifact each
(plus OBJ files where geometry wants a mesh format). Every artifact is
written atomically and carries a content key chained from the inputs, so
a re-run with the same bytes reuses cached stages: changing the
prescription invalidates everything from the flow onward, changing only
the target edge length h re-runs just the quantization.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .cut import CutGraph, build_cut_graph, slice_along
from .deform import (Deformation, build_cross_field, induced_metric,
                     lattice_frame_candidates, rotate_deformation,
                     snap_and_solve)
from .errors import (GaussBonnetViolation, InfiniteSeparatrix,
                     MetricQuadError, PipelineError, StageFailure,
                     UnknownStage)
from .holonomy import face_chart_corners, holonomy_signature
from .immersion import Immersion, immerse, segment_pairings
from .mesh import TriangleMesh, topology_report
from .meshio import load_mesh, obj_quads, obj_with_corner_uvs
from .metric import ConeMetric, metric_from_embedding, vertex_curvature
from .prescription import SingularityPrescription, validate_prescription
from .quadmesh import quad_quality, quantize_and_subdivide
from .ricci import ricci_flow
from .skeleton import build_skeleton
from .tracing import (Separatrix, Trace, TraceStep, step_points_3d,
                      trace_separatrices)

PIPELINE_VERSION = 2
STAGES = ("topology", "ricci", "cut", "immerse", "holonomy", "deform",
          "separatrices", "skeleton", "quad")

DEFAULT_RICCI_TOL = 1e-10
DEFAULT_SNAP_TOL = 0.35
DEFAULT_HOLONOMY_TOL = 0.01
DEFAULT_H = {"relative": 0.05}


@dataclass
class PipelineConfig:
    mesh: str
    prescription: object = None     # inline rows, path, or "bundled:<name>"
    ricci_tol: float = DEFAULT_RICCI_TOL
    snap_tol: float = DEFAULT_SNAP_TOL
    holonomy_tol: float = DEFAULT_HOLONOMY_TOL
    h: object = None                # number, {"absolute":x}, or {"relative":f}
    out: str = "out"
    stage: str = "quad"

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise PipelineError(f"unknown config fields: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self):
        if self.stage not in STAGES:
            raise UnknownStage(
                f"unknown stage {self.stage!r}; stages: {', '.join(STAGES)}")
        for name in ("ricci_tol", "snap_tol", "holonomy_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise PipelineError(f"{name} must be positive, got {v!r}")
        h = self.h if self.h is not None else DEFAULT_H
        if isinstance(h, (int, float)):
            ok = h > 0
        elif isinstance(h, dict) and len(h) == 1:
            kind, val = next(iter(h.items()))
            ok = kind in ("absolute", "relative") and \
                isinstance(val, (int, float)) and val > 0
        else:
            ok = False
        if not ok:
            raise PipelineError(f"h must be a positive number or "
                                f"{{'absolute'|'relative': value}}, got {h!r}")
        if not isinstance(self.mesh, str) or not self.mesh:
            raise PipelineError("config needs a mesh path or bundled:<name>")
        if not self.mesh.startswith("bundled:") and not os.path.exists(self.mesh):
            raise PipelineError(f"mesh file not found: {self.mesh}")
        if isinstance(self.prescription, str) \
                and not self.prescription.startswith("bundled:") \
                and not os.path.exists(self.prescription):
            raise PipelineError(
                f"prescription file not found: {self.prescription}")

    def to_dict(self):
        return {"mesh": self.mesh, "prescription": self.prescription,
                "ricci_tol": self.ricci_tol, "snap_tol": self.snap_tol,
                "holonomy_tol": self.holonomy_tol,
                "h": self.h if self.h is not None else DEFAULT_H,
                "out": self.out, "stage": self.stage}


def resolve_h(h, bbox_diag: float) -> float:
    if h is None:
        h = DEFAULT_H
    if isinstance(h, (int, float)):
        return float(h)
    kind, val = next(iter(h.items()))
    return float(val) if kind == "absolute" else float(val) * bbox_diag


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False,
                      default=_json_default).encode() + b"\n"


def _write_atomic(path, data: bytes):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _key(*parts) -> str:
    msg = hashlib.sha256()
    for p in parts:
        b = p if isinstance(p, bytes) else str(p).encode()
        msg.update(len(b).to_bytes(8, "little"))
        msg.update(b)
    return msg.hexdigest()


@dataclass
class StageRecord:
    stage: str
    files: list
    hashes: dict
    input_key: str
    ms: float
    cached: bool

    def to_dict(self):
        return {"stage": self.stage, "files": list(self.files),
                "hashes": dict(self.hashes), "inputKey": self.input_key,
                "cached": self.cached}


@dataclass
class PipelineArtifacts:
    out_dir: str
    model: str
    n_vertices: int
    n_singularities: int
    stages: dict = field(default_factory=dict)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def manifest(self):
        return {"model": self.model, "nVertices": self.n_vertices,
                "nSingularities": self.n_singularities,
                "stages": {s: r.to_dict() for s, r in self.stages.items()}}

    def timings(self):
        return {"model": self.model, "nVertices": self.n_vertices,
                "nSingularities": self.n_singularities,
                "millisecondsPerStage":
                    {s: round(r.ms, 3) for s, r in self.stages.items()}}


class _Run:
    """Mutable state threaded through the stages."""

    def __init__(self, cfg, mesh, presc, mesh_key, model_name):
        self.cfg = cfg
        self.mesh = mesh
        self.presc = presc
        self.mesh_key = mesh_key
        self.model_name = model_name
        self.extra_files = {}
        self.work = None
        self.metric = None
        self.cut = None
        self.sliced = None
        self.imm = None
        self.pairings = None
        self.holo = None
        self.deformation = None
        self.induced = None
        self.field = None
        self.seps = None
        self.skel = None
        self.qm = None
        self.quality = None

    def emit(self, name, text):
        self.extra_files[name] = text.encode() if isinstance(text, str) else text


def load_inputs(cfg: PipelineConfig):
    """Resolve the mesh and prescription references of a config.

    Returns (mesh, prescription, mesh_key, model_name). Bundled meshes are
    copied so pipeline-side intrinsic flips never touch the cached model.
    """
    if cfg.mesh.startswith("bundled:"):
        model_name = cfg.mesh.split(":", 1)[1]
        model = models.bundled_model(model_name)
        mesh = model.mesh.copy()
        mesh_key = _key("bundled", model_name, PIPELINE_VERSION)
    else:
        model = None
        model_name = os.path.basename(cfg.mesh)
        with open(cfg.mesh, "rb") as fh:
            raw = fh.read()
        mesh = load_mesh(cfg.mesh)
        mesh_key = _key("file", raw)

    p = cfg.prescription
    if p is None:
        presc = SingularityPrescription()
    elif isinstance(p, str) and p.startswith("bundled:"):
        if model is None:
            raise PipelineError(
                "bundled prescription requires a bundled mesh")
        pname = p.split(":", 1)[1]
        if pname not in model.prescriptions:
            raise PipelineError(
                f"model {model_name} has no prescription {pname!r}; "
                f"available: {', '.join(sorted(model.prescriptions))}")
        presc = model.prescriptions[pname]
    elif isinstance(p, str):
        with open(p) as fh:
            presc = SingularityPrescription.from_json(fh.read())
    elif isinstance(p, dict):
        presc = SingularityPrescription(p)
    else:
        presc = SingularityPrescription.from_json(p)
    return mesh, presc, mesh_key, model_name


def _bbox_diag(mesh) -> float:
    P = mesh.positions
    return float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))


def _polyline(mesh, corners, steps):
    pts = [step_points_3d(mesh, corners, s, [0.0])[0] for s in steps]
    pts.append(step_points_3d(mesh, corners, steps[-1], [1.0])[0])
    return [[float(x) for x in p] for p in pts]


# -- stages ------------------------------------------------------------------


def _stage_topology(run):
    rep = topology_report(run.mesh)
    verdict = validate_prescription(run.mesh, run.presc)
    if not verdict.ok:
        raise GaussBonnetViolation(
            "prescription rejected: " + "; ".join(verdict.messages),
            residual=verdict.residual)
    return {"report": rep.to_dict(), "verdict": verdict.to_dict()}


def _load_topology(run, art):
    verdict = validate_prescription(run.mesh, run.presc)
    if not verdict.ok:
        raise GaussBonnetViolation(
            "prescription rejected: " + "; ".join(verdict.messages),
            residual=verdict.residual)


def _stage_ricci(run):
    run.work = run.mesh.copy()
    run.metric = metric_from_embedding(run.work)
    rep = ricci_flow(run.metric, run.presc, tol=run.cfg.ricci_tol)
    a, b = run.work.edge_endpoint_arrays()
    rows = [[int(x), int(y), repr(float(l))]
            for x, y, l in zip(a, b, run.metric.lengths)]
    return {"report": rep.to_dict(), "faces": run.work.faces.tolist(),
            "edgeLengths": rows}


def _load_ricci(run, art):
    faces = np.asarray(art["faces"], dtype=np.int64)
    run.work = TriangleMesh(faces, positions=run.mesh.positions,
                            n_vertices=run.mesh.n_vertices)
    # lengths are keyed by endpoints: edge ids shift when a mesh that was
    # flipped in place is rebuilt from its face list
    L = np.empty(run.work.n_edges)
    seen = 0
    for a, b, l in art["edgeLengths"]:
        e = run.work.edge_between(int(a), int(b))
        if e < 0:
            raise PipelineError("cached flow artifact does not match mesh")
        L[e] = float(l)
        seen += 1
    if seen != run.work.n_edges:
        raise PipelineError("cached flow artifact does not match mesh")
    run.metric = ConeMetric(run.work, L)


def _stage_cut(run):
    run.cut = build_cut_graph(run.work, run.metric, run.presc)
    run.sliced = slice_along(run.work, run.metric, run.cut)
    # endpoint pairs, not edge ids: ids shift when the flipped mesh is
    # rebuilt from its face list on resume
    pairs = sorted(tuple(map(int, run.work.edge_endpoints(e)))
                   for e in run.cut.edges)
    return {"edges": [list(p) for p in pairs],
            "joinedPaths": run.cut.joined_paths,
            "slicedVertices": int(run.sliced.mesh.n_vertices)}


def _load_cut(run, art):
    ids = []
    for a, b in art["edges"]:
        e = run.work.edge_between(int(a), int(b))
        if e < 0:
            raise PipelineError("cached cut artifact does not match mesh")
        ids.append(e)
    run.cut = CutGraph(edges=ids, joined_paths=int(art["joinedPaths"]))
    run.sliced = slice_along(run.work, run.metric, run.cut)


def _immersion_obj(run, z):
    sliced = run.sliced
    positions = run.mesh.positions[sliced.vertex_origin]
    uvs = np.stack([z[sliced.mesh.faces].real, z[sliced.mesh.faces].imag],
                   axis=2)
    return obj_with_corner_uvs(positions, sliced.mesh.faces, uvs)


def _stage_immerse(run):
    run.imm = immerse(run.sliced.metric)
    run.pairings = segment_pairings(run.imm, run.sliced, run.presc)
    run.emit("immersion.obj", _immersion_obj(run, run.imm.z))
    return {"z": [[p.real, p.imag] for p in run.imm.z],
            "bboxDiag": run.imm.bbox_diag,
            "pairings": [p.to_dict() for p in run.pairings]}


def _load_immerse(run, art):
    z = np.array([complex(a, b) for a, b in art["z"]])
    run.imm = Immersion(run.sliced.metric, z)
    run.pairings = segment_pairings(run.imm, run.sliced, run.presc)


def _stage_holonomy(run):
    run.holo = holonomy_signature(run.metric, run.pairings,
                                  tol=run.cfg.holonomy_tol)
    return run.holo.to_dict()


def _load_holonomy(run, art):
    pass   # report only; nothing downstream reads it


def _stage_deform(run):
    run.deformation = snap_and_solve(run.imm, run.sliced, run.pairings,
                                     run.presc, tol_snap=run.cfg.snap_tol)
    run.induced = induced_metric(run.deformation)
    run.field = build_cross_field(run.deformation, run.induced)
    if run.deformation.seams and not run.deformation.arcs:
        # On a closed surface no arc pins the frame; the seam-translation
        # mean inside snap_and_solve is only a first guess (translations
        # are lattice vectors of arbitrary integer slope). Probe-trace the
        # candidate rotations from cone-copy geometry and keep the first
        # frame whose separatrices terminate; on total failure restore the
        # first guess and let the separatrix stage report the bad ray.
        candidates = [0.0]
        for cand in (lattice_frame_candidates(run.deformation, run.presc)
                     + [0.25 * np.pi]):
            if all(abs(cand - c) > 1e-9 for c in candidates):
                candidates.append(cand)
        applied = 0.0
        for cand in candidates:
            rotate_deformation(run.deformation,
                               np.exp(1j * (cand - applied)))
            applied = cand
            run.field = build_cross_field(run.deformation, run.induced)
            try:
                trace_separatrices(run.induced, run.field, run.presc)
                break
            except InfiniteSeparatrix:
                continue
        else:
            rotate_deformation(run.deformation, np.exp(-1j * applied))
            run.field = build_cross_field(run.deformation, run.induced)
    run.emit("deformed.obj", _immersion_obj(run, run.deformation.z))
    K = vertex_curvature(run.induced)
    art = run.deformation.to_dict()
    art["z"] = [[p.real, p.imag] for p in run.deformation.z]
    art["crossAngles"] = [float(a) for a in run.field.angles]
    art["inducedCurvatureSum"] = float(K.sum())
    return art


def _load_deform(run, art):
    z = np.array([complex(a, b) for a, b in art["z"]])
    run.deformation = Deformation(sliced=run.sliced, z=z, seams=[], arcs=[],
                                  energy=float(art["energy"]))
    run.induced = induced_metric(run.deformation)
    run.field = build_cross_field(run.deformation, run.induced)


def _stage_separatrices(run):
    run.seps = trace_separatrices(run.induced, run.field, run.presc)
    corners = face_chart_corners(run.induced)
    rows = []
    for s in run.seps:
        rows.append({"vertex": s.vertex, "ray": s.ray,
                     "coneAngleCoord": s.cone_angle_coord,
                     "trace": s.trace.to_dict(),
                     "polyline": _polyline(run.work, corners, s.trace.steps)})
    return {"separatrices": rows}


def _load_separatrices(run, art):
    seps = []
    for row in art["separatrices"]:
        t = row["trace"]
        steps = [TraceStep(int(s["face"]), complex(*s["a"]), complex(*s["b"]),
                           int(s["crossed"])) for s in t["steps"]]
        end_dir = t.get("endDirection")
        trace = Trace(steps, t["status"], float(t["length"]),
                      int(t["endVertex"]),
                      end_direction=None if end_dir is None else float(end_dir))
        seps.append(Separatrix(vertex=int(row["vertex"]), ray=int(row["ray"]),
                               cone_angle_coord=float(row["coneAngleCoord"]),
                               trace=trace))
    run.seps = seps


def _stage_skeleton(run):
    run.skel = build_skeleton(run.induced, run.field, run.seps, run.presc)
    return run.skel.to_dict()


def _load_skeleton(run, art):
    run.skel = build_skeleton(run.induced, run.field, run.seps, run.presc)


def _stage_quad(run):
    h = resolve_h(run.cfg.h, _bbox_diag(run.mesh))
    run.qm = quantize_and_subdivide(run.skel, h)
    run.quality = quad_quality(run.qm)
    run.emit("quad.obj", obj_quads(run.qm.positions, run.qm.quads))
    run.emit("quality.json", _dumps(run.quality.to_dict()))
    art = run.qm.to_dict()
    art["h"] = h
    art["quality"] = run.quality.to_dict()
    return art


def _load_quad(run, art):
    pass   # terminal stage


_STAGE_FNS = {
    "topology": (_stage_topology, _load_topology),
    "ricci": (_stage_ricci, _load_ricci),
    "cut": (_stage_cut, _load_cut),
    "immerse": (_stage_immerse, _load_immerse),
    "holonomy": (_stage_holonomy, _load_holonomy),
    "deform": (_stage_deform, _load_deform),
    "separatrices": (_stage_separatrices, _load_separatrices),
    "skeleton": (_stage_skeleton, _load_skeleton),
    "quad": (_stage_quad, _load_quad),
}

_EXTRA_FILES = {
    "immerse": ["immersion.obj"],
    "deform": ["deformed.obj"],
    "quad": ["quad.obj", "quality.json"],
}


def _stage_key(run, prev_key, stage):
    cfg = run.cfg
    params = {
        "topology": (run.presc.to_json(),),
        "ricci": (repr(float(cfg.ricci_tol)),),
        "cut": (),
        "immerse": (),
        "holonomy": (repr(float(cfg.holonomy_tol)),),
        "deform": (repr(float(cfg.snap_tol)),),
        "separatrices": (),
        "skeleton": (),
        "quad": (repr(resolve_h(cfg.h, _bbox_diag(run.mesh))),),
    }[stage]
    return _key(prev_key, stage, PIPELINE_VERSION, *params)


def _previous_manifest(out_dir):
    path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(path):
        return {}
    try:
        with open(path) as fh:
            return json.load(fh).get("stages", {})
    except (OSError, json.JSONDecodeError):
        return {}


def run_pipeline(config: PipelineConfig) -> PipelineArtifacts:
    """Execute stages through config.stage, reusing cached artifacts.

    Raises StageFailure wrapping the first stage error; artifacts of the
    completed stages stay on disk, together with a manifest covering them.
    """
    config.validate()
    mesh, presc, mesh_key, model_name = load_inputs(config)
    run = _Run(config, mesh, presc, mesh_key, model_name)

    out_dir = config.out
    os.makedirs(out_dir, exist_ok=True)
    previous = _previous_manifest(out_dir)

    arad = PipelineArtifacts(
        out_dir=out_dir, model=model_name, n_vertices=mesh.n_vertices,
        n_singularities=sum(1 for _, k in presc if k != 0))

    last = STAGES.index(config.stage)
    prev_key = mesh_key
    for stage in STAGES[:last + 1]:
        key = _stage_key(run, prev_key, stage)
        fn, loader = _STAGE_FNS[stage]
        json_name = f"{stage}.json"
        files = [json_name] + _EXTRA_FILES.get(stage, [])

        cached = (stage in previous
                  and previous[stage].get("inputKey") == key
                  and all(os.path.exists(os.path.join(out_dir, f))
                          for f in files))
        t0 = time.perf_counter()
        try:
            if cached:
                with open(os.path.join(out_dir, json_name)) as fh:
                    art = json.load(fh)
                loader(run, art)
                hashes = {}
                for f in files:
                    with open(os.path.join(out_dir, f), "rb") as fh:
                        hashes[f] = hashlib.sha256(fh.read()).hexdigest()
            else:
                run.extra_files = {}
                art = fn(run)
                art["inputKey"] = key
                blob = _dumps(art)
                _write_atomic(os.path.join(out_dir, json_name), blob)
                hashes = {json_name: hashlib.sha256(blob).hexdigest()}
                for name, data in run.extra_files.items():
                    _write_atomic(os.path.join(out_dir, name), data)
                    hashes[name] = hashlib.sha256(data).hexdigest()
        except MetricQuadError as exc:
            _finish(arad)
            raise StageFailure(stage, exc) from exc
        ms = 1000.0 * (time.perf_counter() - t0)
        arad.stages[stage] = StageRecord(stage, files, hashes, key, ms, cached)
        prev_key = key

    _finish(arad)
    return arad


def _finish(arad):
    _write_atomic(os.path.join(arad.out_dir, "manifest.json"),
                  _dumps(arad.manifest()))
    _write_atomic(os.path.join(arad.out_dir, "timings.json"),
                  _dumps(arad.timings()))


def check_holonomy(config: PipelineConfig) -> dict:
    """Run through the holonomy stage and return its signature artifact."""
    cfg = PipelineConfig(**{**config.to_dict(), "stage": "holonomy"})
    arts = run_pipeline(cfg)
    with open(arts.path("holonomy.json")) as fh:
        return json.load(fh)
