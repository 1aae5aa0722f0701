"""
Wire schemas for the HTTP/JSON surface. Request bodies reject unknown fields and
every body carries `schema_version`; payload bytes travel base64-encoded.
"""

import base64
import binascii
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from rollguard.constants import API_SCHEMA_VERSION
from rollguard.models.audit import EligibilityReport, LineageEvent, SnapshotListing
from rollguard.models.base import Digest, ObjectId, SnapshotTag, TxId
from rollguard.models.leaves import Operation, PruneReason
from rollguard.models.requests import RollbackMode, Target, TxOutcome

SchemaVersion = Literal[1]


class WireModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class VersionedModel(WireModel):
    schema_version: SchemaVersion = API_SCHEMA_VERSION


# =============================================================================
# Requests
# =============================================================================


class ChangeBody(WireModel):
    object: ObjectId
    content_base64: Optional[str] = None
    content_digest: Optional[Digest] = None

    @field_validator("content_base64")
    @classmethod
    def check_base64(cls, value):
        if value is not None:
            try:
                base64.b64decode(value, validate=True)
            except binascii.Error as e:
                raise ValueError(f"'content_base64' is not valid base64: {e}") from e
        return value

    @classmethod
    def from_bytes(cls, obj: str, data: bytes) -> "ChangeBody":
        return cls(object=obj, content_base64=base64.b64encode(data).decode("ascii"))

    def content(self) -> Optional[bytes]:
        if self.content_base64 is None:
            return None
        return base64.b64decode(self.content_base64)


class SnapshotBody(WireModel):
    tag: SnapshotTag
    members: Optional[List[ObjectId]] = None


class _MutationBody(VersionedModel):
    actor: Optional[str] = Field(
        default=None, description="Acting principal when no bearer tokens are configured."
    )
    justification: str = ""
    txid: Optional[TxId] = None


class StateUpdateBody(_MutationBody):
    changes: List[ChangeBody] = Field(..., min_length=1)
    snapshot: Optional[SnapshotBody] = None


class TakeSnapshotBody(_MutationBody):
    tag: SnapshotTag
    members: List[ObjectId] = Field(..., min_length=1)


class RollbackBody(_MutationBody):
    mode: RollbackMode
    tag: Optional[SnapshotTag] = None
    targets: Optional[List[Target]] = None


class PruneBody(RollbackBody):
    reason: PruneReason = PruneReason.OTHER
    reason_detail: str = ""


# =============================================================================
# Responses
# =============================================================================


class OutcomeResponse(VersionedModel):
    txid: TxId
    op: Operation
    counter: int
    root: Digest
    pad_sizes: Tuple[int, int, int]
    appended: Dict[str, int]
    replayed: bool = False

    @classmethod
    def from_outcome(cls, outcome: TxOutcome) -> "OutcomeResponse":
        return cls(
            txid=outcome.txid,
            op=outcome.op,
            counter=outcome.counter,
            root=outcome.checkpoint.root,
            pad_sizes=outcome.checkpoint.pad_sizes,
            appended=outcome.appended,
            replayed=outcome.replayed,
        )


class CheckpointResponse(VersionedModel):
    counter: int
    root: Digest
    pad_sizes: Tuple[int, int, int]
    pad_roots: Tuple[Digest, Digest, Digest]
    seal_tag: str
    verified: bool


class SnapshotsResponse(VersionedModel):
    counter: int
    snapshots: List[SnapshotListing]


class LineageResponse(VersionedModel):
    object: ObjectId
    counter: int
    events: List[LineageEvent]


class EligibilityResponse(VersionedModel):
    counter: int
    eligible: bool
    report: EligibilityReport


class ErrorResponse(VersionedModel):
    error: str
    reason: str
    message: str
