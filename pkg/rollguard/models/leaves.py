from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rollguard.models.base import (
    U64,
    Digest,
    ObjectId,
    Record,
    SnapshotTag,
    TxId,
)

# =============================================================================
# Enumerations
# =============================================================================


class LeafKind(IntEnum):
    VERSION_ENTRY = 1
    HEAD_POINTER = 2
    TOMBSTONE = 3
    SNAPSHOT_ENTRY = 4
    INTENT_RECORD = 5
    COMPLETION_RECORD = 6


class Operation(str, Enum):
    UPDATE = "update"
    SNAPSHOT = "snapshot"
    ROLLBACK = "rollback"
    PRUNE = "prune"


class PruneReason(str, Enum):
    RETENTION_EXPIRED = "retention_expired"
    CVE = "cve"
    REDACTION = "redaction"
    OTHER = "other"


class AuditKind(str, Enum):
    INTENT = "intent"
    COMPLETION = "completion"


# =============================================================================
# Catalog records
# =============================================================================


class VersionEntry(Record):
    object: ObjectId
    version: U64
    content_digest: Digest
    origin: Optional[U64] = None
    txid: TxId
    timestamp: U64

    @model_validator(mode="after")
    def origin_precedes_version(self):
        if self.origin is not None and self.origin >= self.version:
            raise ValueError("origin must reference a strictly smaller counter value.")
        return self


class HeadPointer(Record):
    """Latest head for an object. `head_version=None` clears the head."""

    object: ObjectId
    head_version: Optional[U64] = None
    txid: TxId


class Tombstone(Record):
    object: ObjectId
    version: U64
    reason: PruneReason
    reason_detail: str = ""
    txid: TxId
    justification: str
    timestamp: U64


# =============================================================================
# Snapshot registry records
# =============================================================================


class SnapshotMember(Record):
    object: ObjectId
    version: U64


class SnapshotEntry(Record):
    tag: SnapshotTag
    members: List[SnapshotMember]
    txid: TxId
    timestamp: U64

    @field_validator("members")
    @classmethod
    def check_members(cls, members):
        if not members:
            raise ValueError("A snapshot must bind at least one member.")
        objects = [member.object for member in members]
        if len(objects) != len(set(objects)):
            raise ValueError("A snapshot may bind each object at most once.")
        return members


# =============================================================================
# Audit log records
# =============================================================================


class AuditRecord(Record):
    kind: AuditKind
    txid: TxId
    op: Operation
    prior_root: Digest
    actor: str = Field(..., min_length=1)
    justification: str
    scope: Dict[str, Any] = Field(default_factory=dict)
    timestamp: U64


RECORD_TYPES = {
    LeafKind.VERSION_ENTRY: VersionEntry,
    LeafKind.HEAD_POINTER: HeadPointer,
    LeafKind.TOMBSTONE: Tombstone,
    LeafKind.SNAPSHOT_ENTRY: SnapshotEntry,
    LeafKind.INTENT_RECORD: AuditRecord,
    LeafKind.COMPLETION_RECORD: AuditRecord,
}


def kind_of(record: Record) -> LeafKind:
    if isinstance(record, AuditRecord):
        if record.kind == AuditKind.INTENT:
            return LeafKind.INTENT_RECORD
        return LeafKind.COMPLETION_RECORD
    for kind, record_type in RECORD_TYPES.items():
        if type(record) is record_type:
            return kind
    raise TypeError(f"No leaf kind for record type {type(record).__name__}")


# =============================================================================
# Typed PAD leaf
# =============================================================================


class PadLeaf(BaseModel):
    """
    A typed PAD leaf. Encoded as kind (1 byte) || index (8 bytes, big-endian) ||
    canonical JSON payload of the kind-specific record.
    """

    model_config = ConfigDict(frozen=True)

    kind: LeafKind
    index: U64
    payload: bytes

    @classmethod
    def from_record(cls, record: Record, index: int) -> "PadLeaf":
        return cls(kind=kind_of(record), index=index, payload=record.canonical_bytes())

    def encode(self) -> bytes:
        return bytes([int(self.kind)]) + self.index.to_bytes(8, "big") + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "PadLeaf":
        if len(data) < 9:
            raise ValueError("Leaf encoding is shorter than its fixed header.")
        kind = LeafKind(data[0])
        index = int.from_bytes(data[1:9], "big")
        return cls(kind=kind, index=index, payload=bytes(data[9:]))

    def record(self):
        """Parse the payload, rejecting any non-canonical encoding."""
        record_type = RECORD_TYPES[self.kind]
        record = record_type.from_canonical(self.payload)
        if record.canonical_bytes() != self.payload:
            raise ValueError("Leaf payload is not in canonical form.")
        if kind_of(record) != self.kind:
            raise ValueError("Leaf kind does not match its payload.")
        return record
