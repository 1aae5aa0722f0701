from typing import Optional

from fastapi import FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import ValidationError

from rollguard import __version__
from rollguard._exceptions import RollguardException
from rollguard._monitor import ReferenceMonitor
from rollguard.logger_conf import get_logger
from rollguard.service.gateway import Gateway, error_response
from rollguard.service.schemas import (
    CheckpointResponse,
    EligibilityResponse,
    ErrorResponse,
    LineageResponse,
    OutcomeResponse,
    PruneBody,
    RollbackBody,
    SnapshotsResponse,
    StateUpdateBody,
    TakeSnapshotBody,
)

logger = get_logger(__name__)


def bearer_token(authorization: Optional[str]) -> Optional[str]:
    if not authorization:
        return None
    scheme, _, token = authorization.partition(" ")
    return token.strip() if scheme.lower() == "bearer" else None


def create_app(monitor: ReferenceMonitor) -> FastAPI:
    """
    HTTP/JSON front end over one monitor. Handlers are plain functions, so
    FastAPI runs them on its thread pool: reads proceed concurrently while the
    monitor's writer lock serializes state changes.
    """
    gateway = Gateway(monitor)
    app = FastAPI(
        title="rollguard",
        description="Rollback-aware state continuity monitor",
        version=__version__,
    )
    app.state.gateway = gateway

    def _error(exc: Exception) -> JSONResponse:
        status, body = error_response(exc)
        if status >= 500:
            logger.error("Request failed with %s: %s", status, exc)
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.exception_handler(RollguardException)
    async def _rollguard_error(request: Request, exc: RollguardException):
        return _error(exc)

    @app.exception_handler(ValidationError)
    async def _model_error(request: Request, exc: ValidationError):
        return _error(exc)

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        body = ErrorResponse(
            error="ValidationError", reason="invalid-request", message=str(exc.errors())
        )
        return JSONResponse(status_code=400, content=body.model_dump())

    # -------------------------------------------------------------------------
    # State changes
    # -------------------------------------------------------------------------

    @app.post("/v1/state_update", response_model=OutcomeResponse)
    def state_update(
        body: StateUpdateBody,
        authorization: Optional[str] = Header(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return gateway.state_update(body, bearer_token(authorization), idempotency_key)

    @app.post("/v1/take_snapshot", response_model=OutcomeResponse)
    def take_snapshot(
        body: TakeSnapshotBody,
        authorization: Optional[str] = Header(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return gateway.take_snapshot(body, bearer_token(authorization), idempotency_key)

    @app.post("/v1/rollback", response_model=OutcomeResponse)
    def rollback(
        body: RollbackBody,
        authorization: Optional[str] = Header(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return gateway.rollback(body, bearer_token(authorization), idempotency_key)

    @app.post("/v1/prune", response_model=OutcomeResponse)
    def prune(
        body: PruneBody,
        authorization: Optional[str] = Header(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return gateway.prune(body, bearer_token(authorization), idempotency_key)

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    @app.get("/v1/checkpoint", response_model=CheckpointResponse)
    def checkpoint():
        return gateway.checkpoint()

    @app.get("/v1/snapshots", response_model=SnapshotsResponse)
    def snapshots():
        return gateway.snapshots()

    @app.get("/v1/lineage/{object_id:path}", response_model=LineageResponse)
    def lineage(
        object_id: str, output: str = Query("json", alias="format", pattern="^(json|text)$")
    ):
        if output == "text":
            return PlainTextResponse(gateway.lineage_text(object_id))
        return gateway.lineage(object_id)

    @app.get("/v1/eligibility", response_model=EligibilityResponse)
    def eligibility(
        object_id: str = Query(..., alias="object", min_length=1),
        version: int = Query(..., ge=0),
        tag: Optional[str] = None,
    ):
        return gateway.eligibility(object_id, version, tag)

    return app
