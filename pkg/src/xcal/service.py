"""HTTP/JSON service exposing sessions to the UI.

Thin layer over SessionEngine: every endpoint delegates to the engine
and any ranking it returns is byte-for-byte what the engine produced.
Sessions live in memory only; a restart loses them.

Error bodies are ``{"code", "message"}`` with code in
{bad_request, not_found, provider_unavailable, internal} and a matching
HTTP status.
"""

from __future__ import annotations

import hashlib
import io
import mimetypes
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import NotFoundError, ProviderUnavailableError
from .session import Judgment, Query, ResultPage, Session, SessionEngine

DEFAULT_PAGE_SIZE = 50


class QueryBody(BaseModel):
    modality: str
    text: str | None = None
    image_id: str | None = None
    prefix_enabled: bool = False


class CreateSessionBody(BaseModel):
    query: QueryBody


class JudgmentBody(BaseModel):
    image_id: str
    relevant: bool


class FeedbackBody(BaseModel):
    judgments: list[JudgmentBody]


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _page_payload(engine: SessionEngine, session: Session, offset: int = 0,
                  limit: int = DEFAULT_PAGE_SIZE) -> dict:
    page: ResultPage = engine.get_results(session, offset, limit)
    return {
        "entries": [
            {"rank": e.rank, "image_id": e.image_id, "score": e.score, "badge": e.badge}
            for e in page.entries
        ],
        "total": page.total,
    }


def _placeholder_png(image_id: str) -> bytes:
    """Solid-color stand-in for corpora that carry no media files."""
    from PIL import Image

    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    img = Image.new("RGB", (64, 64), (digest[0], digest[1], digest[2]))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(engine: SessionEngine, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="xcal retrieval service")

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()[:3]))

    @app.exception_handler(ValueError)
    async def _on_value_error(request: Request, exc: ValueError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(NotFoundError)
    async def _on_not_found(request: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ProviderUnavailableError)
    async def _on_provider(request: Request, exc: ProviderUnavailableError):
        return _error(503, "provider_unavailable", str(exc))

    @app.exception_handler(Exception)
    async def _on_internal(request: Request, exc: Exception):
        return _error(500, "internal", f"{type(exc).__name__}: {exc}")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        query = Query(
            modality=body.query.modality,
            text=body.query.text,
            image_id=body.query.image_id,
            prefix_enabled=body.query.prefix_enabled,
        )
        session = engine.start_session(query)
        return {"session_id": session.session_id, "page": _page_payload(engine, session)}

    @app.get("/sessions/{session_id}/results")
    def get_results(session_id: str, offset: int = 0, limit: int = DEFAULT_PAGE_SIZE):
        session = engine.get_session(session_id)
        with engine.lock_for(session_id):
            return _page_payload(engine, session, offset, limit)

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackBody):
        session = engine.get_session(session_id)
        judgments = [Judgment(j.image_id, j.relevant) for j in body.judgments]
        with engine.lock_for(session_id):
            engine.submit_feedback(session, judgments)
        return {"accepted_count": len(judgments)}

    @app.post("/sessions/{session_id}/finetune")
    def post_finetune(session_id: str):
        session = engine.get_session(session_id)
        with engine.lock_for(session_id):
            outcome = engine.finetune(session)
            payload = {"round": session.round, "page": _page_payload(engine, session)}
        if outcome.notice:
            payload["notice"] = outcome.notice
        return payload

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        record = engine.corpus.record(image_id)  # raises NotFoundError for unknown ids
        if record.media_path:
            path = Path(record.media_path)
            if not path.is_file():
                raise NotFoundError(f"media file missing for id {image_id!r}")
            media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
            return Response(content=path.read_bytes(), media_type=media_type)
        return Response(content=_placeholder_png(image_id), media_type="image/png")

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
