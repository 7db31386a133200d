"""HTTP API over the study registry.

Uploads are raw DICOM bytes. Submission is idempotent on content digest;
feedback is idempotent on client-supplied event ids; the only auth is a
static reviewer id header on feedback.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from ..metrics.records import UnknownDimension
from ..metrics.report import render_report, report_to_dict
from .config import ServiceConfig
from .pipeline import StudyStatus
from .worklist import (
    BadRequest,
    Registry,
    StateViolation,
    UnknownFinding,
    UnknownStudy,
)

REVIEWER_HEADER = "X-Reviewer-Id"


def create_app(cfg: ServiceConfig, registry: Registry | None = None) -> FastAPI:
    registry = registry or Registry(cfg.store_dir, cfg)
    executor = ThreadPoolExecutor(max_workers=cfg.workers)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        for sid in registry.pending_studies():  # interrupted work from a prior run
            executor.submit(registry.process_study, sid)
        try:
            yield
        finally:
            executor.shutdown(wait=True)
            registry.close()

    app = FastAPI(title="cxr-triage", lifespan=lifespan)
    app.state.registry = registry
    app.state.executor = executor

    @app.exception_handler(UnknownStudy)
    async def _unknown_study(request: Request, exc: UnknownStudy):
        return JSONResponse({"detail": f"unknown study {exc.args[0]}"}, status_code=404)

    @app.exception_handler(UnknownFinding)
    async def _unknown_finding(request: Request, exc: UnknownFinding):
        return JSONResponse({"detail": f"unknown finding {exc.args[0]}"}, status_code=404)

    @app.exception_handler(StateViolation)
    async def _state_violation(request: Request, exc: StateViolation):
        return JSONResponse({"detail": str(exc)}, status_code=409)

    @app.exception_handler(BadRequest)
    async def _bad_request(request: Request, exc: BadRequest):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.exception_handler(UnknownDimension)
    async def _bad_dimension(request: Request, exc: UnknownDimension):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.post("/studies", status_code=202)
    async def submit_study(request: Request):
        data = await request.body()
        if len(data) > cfg.max_upload_bytes:
            return JSONResponse(
                {"detail": f"upload exceeds {cfg.max_upload_bytes} bytes"}, status_code=413
            )
        if len(data) < 132 or data[128:132] != b"DICM":
            return JSONResponse({"detail": "not a DICM stream"}, status_code=400)
        study_id, created = registry.submit_bytes(data)
        if created:
            executor.submit(registry.process_study, study_id)
        return {"study_id": study_id, "created": created}

    @app.get("/studies/{study_id}")
    async def get_study(study_id: str):
        rec = registry.get_study(study_id)
        return {
            "study_id": rec.study_id,
            "status": rec.status.value,
            "reason": rec.reason,
            "triage": rec.triage,
            "received_at": rec.received_at,
            "attributes": rec.attributes,
        }

    @app.get("/worklist")
    async def worklist(request: Request):
        filters = dict(request.query_params)
        return {"studies": registry.worklist(filters)}

    @app.get("/studies/{study_id}/predictions")
    async def get_predictions(study_id: str):
        rec = registry.get_study(study_id)
        if rec.prediction is None:
            raise StateViolation(f"study is {rec.status.value}; no predictions")
        return {
            "study_id": rec.study_id,
            "status": rec.status.value,
            "prediction": rec.prediction,
            "findings": [
                {"finding_ref": ref, "verdicts": verdicts}
                for ref, verdicts in rec.findings.items()
            ],
        }

    @app.post("/predictions/{study_id}/feedback")
    async def post_feedback(
        study_id: str,
        request: Request,
        x_reviewer_id: str | None = Header(default=None, alias=REVIEWER_HEADER),
    ):
        if not x_reviewer_id:
            return JSONResponse({"detail": f"{REVIEWER_HEADER} header required"}, status_code=401)
        body = await request.json()
        if not isinstance(body, dict) or "finding_ref" not in body or "verdict" not in body:
            raise BadRequest("body must carry finding_ref and verdict")
        event_id, applied = registry.feedback(
            study_id,
            str(body["finding_ref"]),
            str(body["verdict"]),
            x_reviewer_id,
            event_id=body.get("event_id"),
        )
        rec = registry.get_study(study_id)
        return {
            "event_id": event_id,
            "applied": applied,
            "study_status": rec.status.value,
        }

    def _report_response(report, fmt: str):
        if fmt == "json":
            return report_to_dict(report)
        return PlainTextResponse(render_report(report, fmt))

    @app.get("/reports/live")
    async def live_report(format: str = "json"):
        if format not in ("json", "csv", "markdown"):
            raise BadRequest(f"unknown format {format!r}")
        return _report_response(registry.live_report(), format)

    @app.get("/reports/subgroup")
    async def subgroup_report(by: str, format: str = "json"):
        if format not in ("json", "csv", "markdown"):
            raise BadRequest(f"unknown format {format!r}")
        return _report_response(registry.subgroup_report(by), format)

    @app.get("/healthz")
    async def healthz():
        counts = registry.status_counts()
        return {
            "studies": sum(counts.values()),
            "pending": counts.get(StudyStatus.RECEIVED.value, 0),
            "by_status": counts,
        }

    return app
