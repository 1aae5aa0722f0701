"""
Translation between wire schemas and monitor calls. The HTTP routes and the local
CLI client both go through `Gateway`, so status mapping and actor resolution have
a single implementation.
"""

from typing import Callable, Dict, Optional, Tuple, TypeVar

from pydantic import ValidationError

from rollguard._exceptions import (
    EligibilityError,
    PolicyViolation,
    RecoveryHalted,
    RecoveryRequired,
    RequestInvalid,
    StaleStateDetected,
    TamperDetected,
)
from rollguard._monitor import ReferenceMonitor
from rollguard.models.checkpoint import AuthoritativeCheckpoint
from rollguard.models.requests import (
    PruneRequest,
    RollbackRequest,
    Target,
    UpdateRequest,
)
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
from rollguard.utils import txid_from_key

T = TypeVar("T")

READ_ATTEMPTS = 2


def error_response(exc: Exception) -> Tuple[int, ErrorResponse]:
    """HTTP status and body for a failed call."""
    if isinstance(exc, (ValidationError, RequestInvalid)):
        status, reason = 400, "invalid-request"
    elif isinstance(exc, PolicyViolation):
        status, reason = 403, "policy-violation"
    elif isinstance(exc, EligibilityError):
        status, reason = 409, exc.reason
    elif isinstance(exc, RecoveryRequired):
        status, reason = 503, exc.kind
    elif isinstance(exc, RecoveryHalted):
        status, reason = 503, "recovery-halted"
    elif isinstance(exc, TamperDetected):
        status, reason = 500, "tamper-detected"
    else:
        status, reason = 500, "internal-error"
    return status, ErrorResponse(error=type(exc).__name__, reason=reason, message=str(exc))


class Gateway:

    def __init__(self, monitor: ReferenceMonitor):
        self.monitor = monitor

    @property
    def actor_tokens(self) -> Optional[Dict[str, str]]:
        return self.monitor.config.actor_tokens

    def resolve_actor(self, claimed: Optional[str], token: Optional[str]) -> str:
        """With tokens configured the token decides the actor; otherwise the body does."""
        if self.actor_tokens:
            actor = self.actor_tokens.get(token or "")
            if actor is None:
                raise PolicyViolation("A valid bearer token is required.")
            if claimed is not None and claimed != actor:
                raise PolicyViolation(f"Token for '{actor}' cannot act as '{claimed}'.")
            return actor
        if not claimed:
            raise RequestInvalid("'actor' is required when no bearer tokens are configured.")
        return claimed

    @staticmethod
    def resolve_txid(txid: Optional[str], idempotency_key: Optional[str]) -> Optional[str]:
        if idempotency_key is None:
            return txid
        derived = txid_from_key(idempotency_key)
        if txid is not None and txid != derived:
            raise RequestInvalid("Body 'txid' disagrees with the Idempotency-Key header.")
        return derived

    # -------------------------------------------------------------------------
    # State changes
    # -------------------------------------------------------------------------

    def state_update(
        self,
        body: StateUpdateBody,
        token: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> OutcomeResponse:
        request = UpdateRequest(
            changes=[
                {
                    "object": change.object,
                    "content": change.content(),
                    "content_digest": change.content_digest,
                }
                for change in body.changes
            ],
            snapshot=body.snapshot.model_dump() if body.snapshot else None,
            actor=self.resolve_actor(body.actor, token),
            justification=body.justification,
            txid=self.resolve_txid(body.txid, idempotency_key),
        )
        return OutcomeResponse.from_outcome(self.monitor.state_update(request))

    def take_snapshot(
        self,
        body: TakeSnapshotBody,
        token: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> OutcomeResponse:
        outcome = self.monitor.take_snapshot(
            body.tag,
            body.members,
            self.resolve_actor(body.actor, token),
            body.justification,
            txid=self.resolve_txid(body.txid, idempotency_key),
        )
        return OutcomeResponse.from_outcome(outcome)

    def _targeted(self, body: RollbackBody, token, idempotency_key) -> Dict:
        return {
            "mode": body.mode,
            "tag": body.tag,
            "targets": body.targets,
            "actor": self.resolve_actor(body.actor, token),
            "justification": body.justification,
            "txid": self.resolve_txid(body.txid, idempotency_key),
        }

    def rollback(
        self,
        body: RollbackBody,
        token: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> OutcomeResponse:
        request = RollbackRequest(**self._targeted(body, token, idempotency_key))
        return OutcomeResponse.from_outcome(self.monitor.rollback(request))

    def prune(
        self,
        body: PruneBody,
        token: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> OutcomeResponse:
        request = PruneRequest(
            **self._targeted(body, token, idempotency_key),
            reason=body.reason,
            reason_detail=body.reason_detail,
        )
        return OutcomeResponse.from_outcome(self.monitor.prune(request))

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    def _pinned(self, query: Callable[[AuthoritativeCheckpoint], T]) -> Tuple[int, T]:
        """Run `query` under the current checkpoint, once more if a commit lands meanwhile."""
        self.monitor.refresh()
        for _ in range(READ_ATTEMPTS):
            at = self.monitor.checkpoint
            if at is None:
                raise RecoveryRequired("No checkpoint has been adopted.")
            try:
                return at.counter, query(at)
            except StaleStateDetected:
                if self.monitor.checkpoint is at:
                    raise
        raise StaleStateDetected("State kept changing during a read.")

    def checkpoint(self) -> CheckpointResponse:
        self.monitor.refresh()
        checkpoint = self.monitor.checkpoint
        if checkpoint is None:
            raise RecoveryRequired("No checkpoint has been adopted.")
        return CheckpointResponse(
            counter=checkpoint.counter,
            root=checkpoint.root,
            pad_sizes=checkpoint.pad_sizes,
            pad_roots=checkpoint.pad_roots,
            seal_tag=checkpoint.seal.tag,
            verified=self.monitor.auditor.verify_checkpoint(checkpoint),
        )

    def snapshots(self) -> SnapshotsResponse:
        counter, listings = self._pinned(self.monitor.auditor.list_snapshots)
        return SnapshotsResponse(counter=counter, snapshots=listings)

    def lineage(self, obj: str) -> LineageResponse:
        counter, events = self._pinned(
            lambda at: self.monitor.auditor.reconstruct_lineage(obj, at)
        )
        return LineageResponse(object=obj, counter=counter, events=events)

    def lineage_text(self, obj: str) -> str:
        return self.monitor.auditor.lineage_text(self.lineage(obj).events)

    def eligibility(self, obj: str, version: int, tag: Optional[str] = None) -> EligibilityResponse:
        target = Target(object=obj, version=version)
        counter, report = self._pinned(
            lambda at: self.monitor.auditor.check_eligibility(target, tag=tag, at=at)
        )
        return EligibilityResponse(counter=counter, eligible=report.eligible, report=report)
