"""
Clients with one interface over the two ways the CLI reaches a monitor: in-process
through the gateway, or over HTTP through a running service.
"""

from typing import Dict, Optional, Type, TypeVar
from urllib.parse import quote

import requests
from pydantic import BaseModel, ValidationError

from rollguard._exceptions import RollguardException
from rollguard._monitor import ReferenceMonitor
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

M = TypeVar("M", bound=BaseModel)


class ServiceError(RollguardException):
    """A call that failed with a mapped HTTP status."""

    def __init__(self, status: int, error: ErrorResponse):
        super().__init__(f"{error.error} ({error.reason}): {error.message}")
        self.status = status
        self.error = error


class LocalClient:
    """Runs calls against a monitor in this process; failures surface as `ServiceError`."""

    def __init__(self, monitor: ReferenceMonitor, token: Optional[str] = None):
        self.gateway = Gateway(monitor)
        self.token = token

    def _call(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (RollguardException, ValidationError) as e:
            status, body = error_response(e)
            raise ServiceError(status, body) from e

    def state_update(self, body: StateUpdateBody, idempotency_key: Optional[str] = None):
        return self._call(self.gateway.state_update, body, self.token, idempotency_key)

    def take_snapshot(self, body: TakeSnapshotBody, idempotency_key: Optional[str] = None):
        return self._call(self.gateway.take_snapshot, body, self.token, idempotency_key)

    def rollback(self, body: RollbackBody, idempotency_key: Optional[str] = None):
        return self._call(self.gateway.rollback, body, self.token, idempotency_key)

    def prune(self, body: PruneBody, idempotency_key: Optional[str] = None):
        return self._call(self.gateway.prune, body, self.token, idempotency_key)

    def checkpoint(self) -> CheckpointResponse:
        return self._call(self.gateway.checkpoint)

    def snapshots(self) -> SnapshotsResponse:
        return self._call(self.gateway.snapshots)

    def lineage(self, obj: str) -> LineageResponse:
        return self._call(self.gateway.lineage, obj)

    def lineage_text(self, obj: str) -> str:
        return self._call(self.gateway.lineage_text, obj)

    def eligibility(self, obj: str, version: int, tag: Optional[str] = None):
        return self._call(self.gateway.eligibility, obj, version, tag)


class HttpClient:

    def __init__(self, base_url: str, token: Optional[str] = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.session = requests.Session()

    def _headers(self, idempotency_key: Optional[str] = None) -> Dict[str, str]:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        if idempotency_key:
            headers["Idempotency-Key"] = idempotency_key
        return headers

    def _request(
        self,
        method: str,
        path: str,
        idempotency_key: Optional[str] = None,
        **kwargs,
    ) -> requests.Response:
        try:
            response = self.session.request(
                method,
                f"{self.base_url}{path}",
                headers=self._headers(idempotency_key),
                timeout=self.timeout,
                **kwargs,
            )
        except requests.RequestException as e:
            raise ServiceError(
                503,
                ErrorResponse(error=type(e).__name__, reason="unreachable", message=str(e)),
            ) from e
        if response.status_code >= 400:
            try:
                error = ErrorResponse.model_validate(response.json())
            except (ValueError, ValidationError):
                error = ErrorResponse(
                    error="HTTPError", reason="internal-error", message=response.text
                )
            raise ServiceError(response.status_code, error)
        return response

    def _post(self, path: str, body: BaseModel, model: Type[M], idempotency_key=None) -> M:
        response = self._request(
            "POST",
            path,
            idempotency_key,
            json=body.model_dump(mode="json", exclude_none=True),
        )
        return model.model_validate(response.json())

    def _get(self, path: str, model: Type[M], params=None) -> M:
        return model.model_validate(self._request("GET", path, params=params).json())

    def state_update(self, body: StateUpdateBody, idempotency_key: Optional[str] = None):
        return self._post("/v1/state_update", body, OutcomeResponse, idempotency_key)

    def take_snapshot(self, body: TakeSnapshotBody, idempotency_key: Optional[str] = None):
        return self._post("/v1/take_snapshot", body, OutcomeResponse, idempotency_key)

    def rollback(self, body: RollbackBody, idempotency_key: Optional[str] = None):
        return self._post("/v1/rollback", body, OutcomeResponse, idempotency_key)

    def prune(self, body: PruneBody, idempotency_key: Optional[str] = None):
        return self._post("/v1/prune", body, OutcomeResponse, idempotency_key)

    def checkpoint(self) -> CheckpointResponse:
        return self._get("/v1/checkpoint", CheckpointResponse)

    def snapshots(self) -> SnapshotsResponse:
        return self._get("/v1/snapshots", SnapshotsResponse)

    def lineage(self, obj: str) -> LineageResponse:
        return self._get(f"/v1/lineage/{quote(obj)}", LineageResponse)

    def lineage_text(self, obj: str) -> str:
        path = f"/v1/lineage/{quote(obj)}"
        return self._request("GET", path, params={"format": "text"}).text

    def eligibility(self, obj: str, version: int, tag: Optional[str] = None):
        params = {"object": obj, "version": version}
        if tag is not None:
            params["tag"] = tag
        return self._get("/v1/eligibility", EligibilityResponse, params=params)
