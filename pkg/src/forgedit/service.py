"""HTTP API over the pipeline: sessions, sweeps, verdicts, jobs, artifacts.

Every mutation maps to exactly one pipeline operation; the service layer
holds no business logic. Long-running work (finetune, sweeps) goes through
the job runner and is polled via /api/jobs/{id}. The built cockpit, when
present, is served statically under /.
"""
from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .algebra import GammaGrid, gamma_grid
from .errors import (
    CaptionerUnavailableError,
    ContractError,
    ForgeditError,
    NotFoundError,
    StateError,
)
from .forgetting import ForgettingStrategy, strategy_from_wire
from .images import decode_png
from .jobs import JobRunner
from .pipeline import Pipeline
from .sampling import SamplerSettings
from .sessions import EditMode, NextAction, Verdict


def _session_view(pipeline: Pipeline, runner: JobRunner, session_id: str) -> dict:
    session = pipeline.store.load_session(session_id)
    view = session.to_json()
    active = runner.active_job_for(session_id)
    view["active_job"] = runner.status(active) if active else None
    return view


def _parse_mode(raw) -> EditMode:
    token = str(raw or "subtraction").strip().lower()
    for mode in EditMode:
        if mode.value.lower() == token:
            return mode
    raise ContractError(f"unknown edit mode {raw!r}")


def _parse_action(body: dict) -> NextAction:
    strategy: ForgettingStrategy = strategy_from_wire(body.get("strategy", "none"))
    grid = GammaGrid.from_values(body["grid"]) if body.get("grid") else gamma_grid()
    return NextAction(mode=_parse_mode(body.get("mode")), strategy=strategy, grid=grid)


def create_app(pipeline: Pipeline, runner: JobRunner | None = None, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="forgedit", version="0.1.0")
    runner = runner if runner is not None else JobRunner(pipeline.store, pipeline)
    app.state.pipeline = pipeline
    app.state.runner = runner

    @app.exception_handler(ForgeditError)
    async def _forgedit_error(request: Request, exc: ForgeditError):
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, StateError):
            status = 409
        elif isinstance(exc, CaptionerUnavailableError):
            status = 502
        else:
            status = 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.get("/api/health")
    async def health() -> dict:
        return {"ok": True}

    @app.post("/api/sessions")
    def create_session(
        image: UploadFile = File(...),
        target_prompt: str = Form(...),
        source_prompt: str | None = Form(None),
        session_id: str | None = Form(None),
    ) -> dict:
        pixels = decode_png(image.file.read())
        session = pipeline.register_session(pixels, target_prompt, source_prompt, session_id)
        job_id = runner.submit_prepare(session.id)
        view = session.to_json()
        view["job_id"] = job_id
        return view

    @app.get("/api/sessions")
    def list_sessions() -> list[dict]:
        return [
            {
                "id": s.id,
                "state": s.state.value.value,
                "target_prompt": s.target_prompt.text,
                "sweep_count": len(s.sweeps),
                "created_at": s.created_at,
                "updated_at": s.updated_at,
            }
            for s in pipeline.store.list_sessions()
        ]

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _session_view(pipeline, runner, session_id)

    @app.post("/api/sessions/{session_id}/sweeps")
    def post_sweep(session_id: str, body: dict) -> dict:
        pipeline.store.load_session(session_id)  # 404 before queueing
        action = _parse_action(body)
        sampler = SamplerSettings.from_json(body["sampler"]) if body.get("sampler") else None
        return {"job_id": runner.submit_sweep(session_id, action, sampler)}

    @app.post("/api/sessions/{session_id}/verdict")
    def post_verdict(session_id: str, body: dict) -> dict:
        action = pipeline.record_verdict(session_id, Verdict.from_json(body))
        if action is None:
            return {"done": True}
        return action.to_json()

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        return runner.status(job_id)

    @app.get("/api/images/{artifact_id}")
    def get_image(artifact_id: str) -> Response:
        payload = pipeline.store.load_artifact("image", artifact_id)
        return Response(content=payload, media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="cockpit")

    return app
