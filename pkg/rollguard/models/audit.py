from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from rollguard.models.base import U64, Digest, ObjectId, SnapshotTag, TxId
from rollguard.models.leaves import Operation, PruneReason
from rollguard.models.proofs import InclusionProof
from rollguard.models.requests import Target

# Field order of the plain-text lineage export.
LINEAGE_FIELDS = (
    "object",
    "version",
    "leaf_index",
    "timestamp",
    "txid",
    "origin",
    "content_origin",
    "content_digest",
    "description",
)


class AuditModel(BaseModel):
    model_config = ConfigDict(frozen=True)


class LineageEvent(AuditModel):
    object: ObjectId
    version: U64
    leaf_index: U64
    timestamp: U64
    txid: TxId
    description: str
    origin: Optional[U64] = None
    content_origin: Optional[U64] = None
    content_digest: Digest

    def to_line(self) -> str:
        values = self.model_dump()
        return "\t".join(
            "-" if values[field] is None else str(values[field]) for field in LINEAGE_FIELDS
        )


class TombstoneEvidence(AuditModel):
    object: ObjectId
    version: U64
    reason: PruneReason
    reason_detail: str
    txid: TxId
    justification: str
    timestamp: U64
    leaf_index: U64
    proof: InclusionProof


class EligibilityReport(AuditModel):
    target: Target
    in_catalog: bool
    catalog_proof: Optional[InclusionProof] = None
    tombstoned: bool
    tombstone: Optional[TombstoneEvidence] = None
    in_snapshot: Optional[bool] = None
    snapshot_proof: Optional[InclusionProof] = None

    @property
    def eligible(self) -> bool:
        return self.in_catalog and not self.tombstoned and self.in_snapshot is not False


class SnapshotListing(AuditModel):
    tag: SnapshotTag
    members: List[Target]
    txid: TxId
    timestamp: U64
    leaf_index: U64
    pruned_members: List[Target]


class TransactionRecord(AuditModel):
    txid: TxId
    op: Operation
    actor: str
    justification: str
    scope: Dict[str, Any]
    intent_index: U64
    completion_index: Optional[U64] = None
    prior_root: Digest

    @property
    def completed(self) -> bool:
        return self.completion_index is not None
