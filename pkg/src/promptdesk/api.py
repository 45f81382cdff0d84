"""HTTP surface for the authoring workflow and the published-bot chat.

Thin mapping from endpoints to AuthoringService methods; every error is a
single-shape JSON object {code, message, details} and every state change
corresponds to exactly one service call.
"""

from __future__ import annotations

import socket
from typing import Any, Optional

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .domain import Bot, PipelineRun, PromptVersion, StudentProfile, TestCase
from .errors import (
    BusyError,
    ConfigurationError,
    GateBlockedError,
    GatewayError,
    InputRequiredError,
    NotFoundError,
    PromptDeskError,
    StateError,
    StoreError,
    ValidationError,
)
from .service import AuthoringService

_STATUS_BY_CODE = {
    "validation": 400,
    "state": 409,
    "not_found": 404,
    "gate_blocked": 409,
    "busy": 409,
    "provider": 502,
    "internal": 500,
}


def _error_response(
    code: str, message: str, details: Optional[dict[str, Any]] = None
) -> JSONResponse:
    body: dict[str, Any] = {"code": code, "message": message}
    if details is not None:
        body["details"] = details
    return JSONResponse(status_code=_STATUS_BY_CODE[code], content=body)


def _code_for(exc: Exception) -> str:
    if isinstance(exc, (ValidationError, InputRequiredError)):
        return "validation"
    if isinstance(exc, StateError):
        return "state"
    if isinstance(exc, NotFoundError):
        return "not_found"
    if isinstance(exc, GateBlockedError):
        return "gate_blocked"
    if isinstance(exc, BusyError):
        return "busy"
    if isinstance(exc, (GatewayError, ConfigurationError)):
        return "provider"
    if isinstance(exc, StoreError):
        return "internal"
    return "internal"


class CreateBotBody(BaseModel):
    title: str
    description: str = ""
    model_choice: str


class CreateProfileBody(BaseModel):
    name: str
    opening_message: str
    description: str = ""
    followups: list[str] = []


class StartCaseBody(BaseModel):
    profile_id: str


class AdvanceBody(BaseModel):
    message: Optional[str] = None


class CorrectionBody(BaseModel):
    turn_index: int
    corrected_text: str


class DecisionBody(BaseModel):
    decision: str


class PromptBody(BaseModel):
    full_text: Optional[str] = None
    template: Optional[str] = None


class ShareMessageBody(BaseModel):
    message: str
    session_id: Optional[str] = None


def bot_view(service: AuthoringService, bot: Bot) -> dict[str, Any]:
    view = bot.model_dump(mode="json")
    view["current_prompt"] = service.current_prompt_text(bot)
    return view


def case_view(case: TestCase) -> dict[str, Any]:
    return case.model_dump(mode="json")


def run_view(service: AuthoringService, run: PipelineRun) -> dict[str, Any]:
    view = run.model_dump(mode="json")
    if run.proposed_version is not None:
        proposed = service._load_version(run.proposed_version)
        view["proposed"] = {
            "version_id": proposed.id,
            "full_text": proposed.full_text,
            "diff": proposed.diff_from_parent.model_dump(mode="json"),
        }
    return view


def version_view(version: PromptVersion) -> dict[str, Any]:
    return version.model_dump(mode="json")


def profile_view(profile: StudentProfile) -> dict[str, Any]:
    return profile.model_dump(mode="json")


def create_app(service: AuthoringService) -> FastAPI:
    app = FastAPI(title="promptdesk", docs_url=None, redoc_url=None)

    @app.exception_handler(PromptDeskError)
    async def handle_domain_error(request: Request, exc: PromptDeskError):
        details: Optional[dict[str, Any]] = None
        if isinstance(exc, GateBlockedError):
            details = {
                "reasons": exc.reasons,
                "unpassed_case_ids": exc.unpassed_case_ids,
            }
        return _error_response(_code_for(exc), str(exc), details)

    @app.exception_handler(RequestValidationError)
    async def handle_request_validation(request: Request, exc: RequestValidationError):
        return _error_response("validation", "invalid request body", {"errors": exc.errors()})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- bots -----------------------------------------------------------------

    @app.post("/bots", status_code=201)
    def create_bot(body: CreateBotBody):
        bot = service.create_bot(body.title, body.description, body.model_choice)
        return bot_view(service, bot)

    @app.get("/bots")
    def list_bots():
        return {"bots": [bot_view(service, b) for b in service.list_bots()]}

    @app.get("/bots/{bot_id}")
    def get_bot(bot_id: str):
        return bot_view(service, service.get_bot(bot_id))

    @app.post("/bots/{bot_id}/materials")
    async def upload_material(bot_id: str, file: UploadFile = File(...)):
        data = await file.read()
        bot = service.add_material(bot_id, file.filename or "upload.txt", data)
        return bot_view(service, bot)

    # -- profiles ---------------------------------------------------------------

    @app.get("/profiles")
    def list_profiles():
        return {"profiles": [profile_view(p) for p in service.list_profiles()]}

    @app.post("/profiles", status_code=201)
    def create_profile(body: CreateProfileBody):
        profile = service.create_profile(
            body.name, body.opening_message, body.description, body.followups
        )
        return profile_view(profile)

    # -- test cases ----------------------------------------------------------------

    @app.get("/bots/{bot_id}/test-cases")
    def list_test_cases(bot_id: str):
        service.get_bot(bot_id)  # 404 before returning an empty list
        return {"cases": [case_view(c) for c in service.cases_for(bot_id)]}

    @app.post("/bots/{bot_id}/test-cases", status_code=201)
    def start_test_case(bot_id: str, body: StartCaseBody):
        case, gateway_error = service.start_test_case(bot_id, body.profile_id)
        if gateway_error is not None:
            return _error_response(
                "provider", gateway_error, {"test_case_id": case.id}
            )
        return case_view(case)

    @app.get("/test-cases/{case_id}")
    def get_test_case(case_id: str):
        return case_view(service._load_case(case_id))

    @app.post("/test-cases/{case_id}/turns")
    def advance_test_case(case_id: str, body: AdvanceBody):
        return case_view(service.advance_test_case(case_id, body.message))

    @app.post("/test-cases/{case_id}/corrections", status_code=202)
    def submit_correction(case_id: str, body: CorrectionBody):
        correction, run = service.submit_correction(
            case_id, body.turn_index, body.corrected_text
        )
        return {"correction": correction.model_dump(mode="json"), "run_id": run.id}

    @app.post("/test-cases/{case_id}/mark-pass")
    def mark_pass(case_id: str):
        return case_view(service.mark_pass(case_id))

    # -- pipeline runs ----------------------------------------------------------------

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return run_view(service, service.get_run(run_id))

    @app.post("/runs/{run_id}/decision")
    def decide_run(run_id: str, body: DecisionBody):
        bot, run, cases, warnings = service.decide_run(run_id, body.decision)
        return {
            "bot": bot_view(service, bot),
            "run": run_view(service, run),
            "cases": [case_view(c) for c in cases],
            "warnings": warnings,
        }

    # -- prompt editing ----------------------------------------------------------------

    @app.post("/bots/{bot_id}/prompt")
    def set_prompt(bot_id: str, body: PromptBody):
        bot, version = service.set_prompt(bot_id, body.full_text, body.template)
        return {"bot": bot_view(service, bot), "version": version_view(version)}

    @app.get("/bots/{bot_id}/versions")
    def list_versions(bot_id: str):
        service.get_bot(bot_id)  # 404 before returning an empty chain
        return {"versions": [version_view(v) for v in service.versions_for(bot_id)]}

    # -- publication and sharing ---------------------------------------------------------

    @app.post("/bots/{bot_id}/publish")
    def publish(bot_id: str):
        bot, share_url = service.publish(bot_id)
        return {"share_url": share_url, "bot": bot_view(service, bot)}

    @app.get("/share/{token}")
    def share_card(token: str):
        bot = service.bot_by_token(token)
        return {
            "title": bot.title,
            "description": bot.description,
            "model_choice": bot.model_choice.value,
        }

    @app.post("/share/{token}/messages")
    def share_chat(token: str, body: ShareMessageBody):
        reply, session_id = service.share_chat(token, body.message, body.session_id)
        return {"reply": reply, "session_id": session_id}

    return app


def serve(service: AuthoringService, bind_addr: str) -> None:
    """Run the API until terminated; completes in-flight requests on shutdown."""
    import uvicorn

    host, _, port_text = bind_addr.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port_text)
    # Fail fast with a clear error instead of uvicorn's exit-on-bind-failure.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise StateError(f"cannot bind {bind_addr}: {exc}") from exc
    finally:
        probe.close()
    uvicorn.run(
        create_app(service),
        host=host,
        port=port,
        log_level="warning",
        timeout_graceful_shutdown=10,
    )
