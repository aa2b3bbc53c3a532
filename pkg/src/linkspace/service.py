"""HTTP surface over the session layer: REST endpoints plus an event stream."""

from __future__ import annotations

import json
import queue

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from . import cluster as ce
from . import data as cd
from . import nldr as ne
from . import tour as te
from .session import SessionError, SessionManager

_DOMAIN_ERRORS = (SessionError, cd.DataError, ce.ClusterError, te.TourError, ne.NldrError)


class UploadBody(BaseModel):
    csv: str
    roles: dict
    distances: list[list[float]] | None = None


class SelectionBody(BaseModel):
    selected: list[int]
    origin: str = ""


class JobBody(BaseModel):
    panel: str = "a"
    method: str | None = None
    space: str = "clustering"
    seed: int = 0
    spec: dict | None = None


def create_app(manager: SessionManager | None = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="linkspace")
    app.state.manager = manager

    def session(sid: str):
        try:
            return manager.get(sid)
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    def guard(fn):
        try:
            return fn()
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sessions")
    def create_session():
        s = manager.create_session()
        return {"id": s.id, "revision": s.revision}

    @app.post("/sessions/{sid}/data")
    def upload(sid: str, body: UploadBody):
        s = session(sid)
        return guard(lambda: s.upload_data(body.csv, body.roles, precomputed_dist=body.distances))

    @app.patch("/sessions/{sid}/config")
    def patch_config(sid: str, patch: dict):
        s = session(sid)
        return guard(lambda: s.set_config(patch))

    @app.get("/sessions/{sid}/config")
    def get_config(sid: str):
        return session(sid).export_settings()

    @app.get("/sessions/{sid}/overview")
    def overview(sid: str):
        return guard(lambda: session(sid).get_overview())

    @app.get("/sessions/{sid}/stats")
    def stats(sid: str, k_max: int = 8):
        return guard(lambda: {"rows": session(sid).get_stats(k_max)})

    @app.get("/sessions/{sid}/benchmarks")
    def benchmarks(sid: str):
        return guard(lambda: session(sid).get_benchmarks())

    @app.get("/sessions/{sid}/coordinates")
    def coordinates(sid: str, variable: str, center: bool = True, scale: bool = False, hidden: str = ""):
        hidden_clusters = {int(c) for c in hidden.split(",") if c}
        return guard(
            lambda: session(sid).get_coordinate_view(variable, center=center, scale=scale, hidden_clusters=hidden_clusters)
        )

    @app.get("/sessions/{sid}/breakdown")
    def breakdown(sid: str, cluster: int):
        return guard(lambda: session(sid).get_breakdown(cluster))

    @app.get("/sessions/{sid}/comparison")
    def comparison(sid: str):
        return guard(lambda: session(sid).get_comparison())

    @app.post("/sessions/{sid}/jobs/embedding")
    def start_embedding(sid: str, body: JobBody):
        s = session(sid)
        if body.method is None:
            raise HTTPException(status_code=422, detail="method is required")
        job = guard(lambda: s.compute_embedding(body.panel, body.method, space=body.space, seed=body.seed))
        return job.to_doc()

    @app.post("/sessions/{sid}/jobs/tour")
    def start_tour(sid: str, body: JobBody):
        s = session(sid)
        job = guard(lambda: s.compute_tour(body.panel, body.spec or {}))
        return job.to_doc()

    @app.post("/sessions/{sid}/tours/copy")
    def copy_tour(sid: str, body: dict):
        s = session(sid)
        return guard(lambda: s.copy_path(body["from_panel"], body["to_panel"]))

    @app.get("/sessions/{sid}/jobs/{job_id}")
    def job_status(sid: str, job_id: str):
        return guard(lambda: session(sid).get_job(job_id).to_doc())

    @app.delete("/sessions/{sid}/jobs/{job_id}")
    def job_cancel(sid: str, job_id: str):
        return guard(lambda: session(sid).cancel_job(job_id).to_doc())

    @app.post("/sessions/{sid}/selection")
    def selection(sid: str, body: SelectionBody):
        s = session(sid)
        revision = guard(lambda: s.set_selection(body.selected, body.origin))
        return {"revision": revision, "selected": sorted(s.selection)}

    @app.get("/sessions/{sid}/selection")
    def get_selection(sid: str):
        s = session(sid)
        return {"revision": s.selection_revision, "selected": sorted(s.selection)}

    @app.get("/sessions/{sid}/export")
    def export(sid: str):
        s = session(sid)
        return guard(
            lambda: {
                "assignments_csv": s.export_csv(),
                "settings": s.export_settings(),
            }
        )

    @app.get("/sessions/{sid}/events")
    async def events(sid: str, request: Request):
        s = session(sid)
        q = s.subscribe()

        def stream():
            try:
                while True:
                    try:
                        event = q.get(timeout=10)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
            finally:
                s.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
