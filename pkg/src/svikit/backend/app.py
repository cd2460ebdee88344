"""Public HTTP surface: /api/v1/<function> over a SurveyService.

Parameters arrive as form fields, a JSON body, or query arguments;
responses are plain JSON dicts with the documented key names. Errors map
to {"error": <code>} with 400 (validation), 401 (identifier mismatch),
404 (not found / exhausted), or 409 (duplicate, category full, undo
unavailable).
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .service import ApiError, SurveyService

log = logging.getLogger(__name__)


async def _params(request: Request) -> dict:
    data: dict = dict(request.query_params)
    if request.method == "POST":
        content_type = request.headers.get("content-type", "")
        if "json" in content_type:
            body = await request.json()
            if not isinstance(body, dict):
                raise ApiError("ValidationError", 400, "JSON body must be an object")
            data.update(body)
        elif content_type:
            form = await request.form()
            data.update(form)
    return data


def create_app(service: SurveyService, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="svikit survey API", version="1")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse({"error": exc.code}, status_code=exc.http_status)

    def pick(data: dict, *names: str) -> dict:
        return {n: data[n] for n in names if n in data}

    @app.api_route("/api/v1/newperson", methods=["POST"])
    async def newperson(request: Request):
        data = await _params(request)
        return service.newperson(
            age=data.get("age"),
            consent=data.get("consent"),
            **pick(data, "monthly_gross_income", "education", "gender", "country", "postcode"),
        )

    @app.api_route("/api/v1/getsession", methods=["GET", "POST"])
    async def getsession(request: Request):
        data = await _params(request)
        return service.getsession(session_id=data.get("session_id"), cookie_hash=data.get("cookie_hash"))

    @app.api_route("/api/v1/fetch", methods=["GET", "POST"])
    async def fetch(request: Request):
        data = await _params(request)
        if "session_id" not in data:
            raise ApiError("ValidationError", 400, "session_id is required")
        return service.fetch(data["session_id"])

    @app.api_route("/api/v1/new", methods=["POST"])
    async def new(request: Request):
        data = await _params(request)
        for name in ("session_id", "cookie_hash", "image_id", "category_id", "rating"):
            if name not in data:
                raise ApiError("ValidationError", 400, f"{name} is required")
        return service.new_rating(
            data["session_id"], data["cookie_hash"], data["image_id"], data["category_id"], data["rating"]
        )

    @app.api_route("/api/v1/undo", methods=["POST"])
    async def undo(request: Request):
        data = await _params(request)
        for name in ("session_id", "cookie_hash"):
            if name not in data:
                raise ApiError("ValidationError", 400, f"{name} is required")
        return service.undo(data["session_id"], data["cookie_hash"])

    @app.api_route("/api/v1/countratingsbycategory", methods=["GET", "POST"])
    async def countratingsbycategory(request: Request):
        data = await _params(request)
        if "session_id" not in data:
            raise ApiError("ValidationError", 400, "session_id is required")
        return service.count_ratings_by_category(data["session_id"])

    # Issue reports have no API function in v1; log-only stub so the
    # frontend's report button has somewhere to post.
    @app.api_route("/api/v1/report", methods=["POST"])
    async def report(request: Request):
        data = await _params(request)
        log.info("issue report: %s", {k: str(v)[:500] for k, v in data.items()})
        return {"ok": True}

    return app
