"""Session-scoped HTTP service for interactive singularity placement.

Each session owns one uploaded mesh, one mutable prescription, and a
private artifact directory. Runs reuse the pipeline's content-keyed
cache, so editing the prescription re-runs the flow while editing only h
re-runs the quantization. One run at a time per session; sessions are
independent.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
import threading
import uuid

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse

from .errors import (BindError, MeshError, MetricQuadError, StageFailure,
                     UnknownVertex)
from .mesh import topology_report
from .meshio import load_mesh
from .pipeline import STAGES, PipelineConfig, resolve_h, run_pipeline
from .prescription import SingularityPrescription, validate_prescription

ARTIFACT_FILES = {
    "manifest.json", "timings.json", "topology.json", "ricci.json",
    "cut.json", "immerse.json", "immersion.obj", "holonomy.json",
    "deform.json", "deformed.obj", "separatrices.json", "skeleton.json",
    "quad.json", "quad.obj", "quality.json",
}


def _error_body(exc, stage=None):
    body = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if stage is not None:
        body["error"]["stage"] = stage
    residual = getattr(exc, "residual", None)
    if residual is not None:
        body["error"]["residualPiHalf"] = residual
    cause = getattr(exc, "cause", None)
    if cause is not None:
        body["error"]["type"] = type(cause).__name__
        inner = getattr(cause, "residual", None)
        if inner is not None:
            body["error"]["residualPiHalf"] = inner
    return body


class Session:
    def __init__(self, ident, root):
        self.ident = ident
        self.dir = os.path.join(root, ident)
        os.makedirs(self.dir, exist_ok=True)
        self.mesh = None
        self.mesh_path = None
        self.prescription = SingularityPrescription()
        self.h = None
        self.run_lock = threading.Lock()

    def geometry(self):
        m = self.mesh
        return {
            "positions": [[float(x) for x in p] for p in m.positions],
            "faces": m.faces.tolist(),
            "boundaryVertices": [int(v) for v in
                                 m.is_boundary_vertex.nonzero()[0]],
        }

    def config(self, through):
        return PipelineConfig(
            mesh=self.mesh_path,
            prescription={v: k for v, k in self.prescription},
            h=self.h,
            out=self.dir,
            stage=through,
        )


def create_app(max_sessions: int = 32, root: str | None = None) -> FastAPI:
    app = FastAPI(title="metricquad sessions")
    root = root or tempfile.mkdtemp(prefix="metricquad-")
    sessions: dict = {}
    registry_lock = threading.Lock()

    def get_session(sid) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(404, detail=f"no session {sid!r}")
        return s

    @app.post("/sessions", status_code=201)
    def create_session():
        with registry_lock:
            if len(sessions) >= max_sessions:
                return JSONResponse(
                    status_code=429,
                    content={"error": {"type": "SessionLimitExceeded",
                                       "message":
                                       f"limit of {max_sessions} sessions"}})
            sid = uuid.uuid4().hex[:12]
            sessions[sid] = Session(sid, root)
        return {"id": sid}

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        with registry_lock:
            s = sessions.pop(sid, None)
        if s is None:
            raise HTTPException(404, detail=f"no session {sid!r}")
        shutil.rmtree(s.dir, ignore_errors=True)
        return {"deleted": sid}

    @app.post("/sessions/{sid}/mesh")
    async def upload_mesh(sid: str, request: Request, fmt: str | None = None):
        s = get_session(sid)
        raw = await request.body()
        text = raw.decode("utf-8", errors="replace")
        kind = fmt or ("off" if text.lstrip().upper().startswith("OFF")
                       else "obj")
        try:
            mesh = load_mesh(text, fmt=kind)
        except MeshError as exc:
            return JSONResponse(status_code=422, content=_error_body(exc))
        path = os.path.join(s.dir, f"mesh.{kind}")
        with open(path, "wb") as fh:
            fh.write(raw)
        s.mesh = mesh
        s.mesh_path = path
        try:
            validate_prescription(mesh, s.prescription)
        except UnknownVertex:
            s.prescription = SingularityPrescription()
        return {"topology": topology_report(mesh).to_dict(),
                "geometry": s.geometry()}

    @app.get("/sessions/{sid}/mesh")
    def get_mesh(sid: str):
        s = get_session(sid)
        if s.mesh is None:
            raise HTTPException(404, detail="no mesh uploaded")
        return {"topology": topology_report(s.mesh).to_dict(),
                "geometry": s.geometry()}

    @app.get("/sessions/{sid}/singularities")
    def get_singularities(sid: str):
        s = get_session(sid)
        body = {"entries": [{"vertex": v, "index": k}
                            for v, k in s.prescription]}
        if s.mesh is not None:
            body["verdict"] = validate_prescription(
                s.mesh, s.prescription).to_dict()
        return body

    @app.put("/sessions/{sid}/singularities")
    async def put_singularities(sid: str, request: Request):
        s = get_session(sid)
        if s.mesh is None:
            raise HTTPException(409, detail="upload a mesh first")
        try:
            data = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return JSONResponse(status_code=422, content=_error_body(exc))
        rows = data["entries"] if isinstance(data, dict) else data
        try:
            presc = SingularityPrescription.from_json(rows)
            verdict = validate_prescription(s.mesh, presc)
        except (MetricQuadError, KeyError, TypeError, ValueError) as exc:
            return JSONResponse(status_code=422, content=_error_body(exc))
        if not verdict.ok:
            return JSONResponse(status_code=422,
                                content={"verdict": verdict.to_dict()})
        s.prescription = presc
        return {"verdict": verdict.to_dict()}

    @app.post("/sessions/{sid}/run")
    def run(sid: str, through: str = "quad", h: float | None = None,
            h_relative: float | None = None):
        s = get_session(sid)
        if s.mesh is None:
            raise HTTPException(409, detail="upload a mesh first")
        if through not in STAGES:
            raise HTTPException(
                422, detail=f"unknown stage {through!r}; one of {STAGES}")
        if h is not None:
            s.h = float(h)
        elif h_relative is not None:
            s.h = {"relative": float(h_relative)}
        if not s.run_lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409,
                content={"error": {"type": "RunInFlight",
                                   "message": "a run is already in flight"}})
        try:
            arts = run_pipeline(s.config(through))
        except StageFailure as exc:
            return JSONResponse(status_code=422,
                                content=_error_body(exc, stage=exc.stage))
        except MetricQuadError as exc:
            return JSONResponse(status_code=422, content=_error_body(exc))
        finally:
            s.run_lock.release()
        return {"manifest": arts.manifest(), "timings": arts.timings()}

    @app.get("/sessions/{sid}/artifacts/{name}")
    def artifact(sid: str, name: str):
        s = get_session(sid)
        if name not in ARTIFACT_FILES:
            raise HTTPException(404, detail=f"unknown artifact {name!r}")
        path = os.path.join(s.dir, name)
        if not os.path.exists(path):
            raise HTTPException(404, detail=f"artifact {name!r} not built")
        media = "application/json" if name.endswith(".json") else "text/plain"
        return FileResponse(path, media_type=media)

    @app.get("/sessions/{sid}/report")
    def report(sid: str):
        s = get_session(sid)
        body = {}
        for name in ("manifest.json", "timings.json", "quality.json"):
            path = os.path.join(s.dir, name)
            if os.path.exists(path):
                with open(path) as fh:
                    body[name.split(".")[0]] = json.load(fh)
        if not body:
            raise HTTPException(404, detail="nothing has run yet")
        if s.mesh is not None and s.h is not None:
            P = s.mesh.positions
            diag = float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))
            body["hAbsolute"] = resolve_h(s.h, diag)
        return body

    return app


def serve(bind: str = "127.0.0.1:8008", max_sessions: int = 32):
    """Run the service until interrupted. Raises BindError when the
    address is taken or malformed."""
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise BindError(f"bind address must be host:port, got {bind!r}")
    app = create_app(max_sessions=max_sessions)
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    except OSError as exc:
        raise BindError(f"cannot bind {bind}: {exc}") from exc
