from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rollguard.models.base import U64, Digest, ObjectId, SnapshotTag, TxId
from rollguard.models.checkpoint import AuthoritativeCheckpoint
from rollguard.models.leaves import Operation, PruneReason


class RequestModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ObjectChange(RequestModel):
    """New content for one object, given either as raw bytes or as a stored digest."""

    object: ObjectId
    content: Optional[bytes] = None
    content_digest: Optional[Digest] = None

    @model_validator(mode="after")
    def exactly_one_source(self):
        if (self.content is None) == (self.content_digest is None):
            raise ValueError("Provide exactly one of 'content' or 'content_digest'.")
        return self


class SnapshotSpec(RequestModel):
    tag: SnapshotTag
    members: Optional[List[ObjectId]] = Field(
        default=None,
        description="Objects bound by the tag. Defaults to the objects being changed.",
    )


class Target(RequestModel):
    object: ObjectId
    version: U64


class RollbackMode(str, Enum):
    SNAPSHOT = "snapshot"
    SELECTIVE = "selective"


def _check_unique_objects(field_name: str, objects: List[str]) -> None:
    if len(objects) != len(set(objects)):
        raise ValueError(f"'{field_name}' must not name the same object twice.")


class UpdateRequest(RequestModel):
    changes: List[ObjectChange] = Field(..., min_length=1)
    snapshot: Optional[SnapshotSpec] = None
    actor: str = Field(..., min_length=1)
    justification: str = ""
    txid: Optional[TxId] = None

    @field_validator("changes")
    @classmethod
    def unique_objects(cls, changes):
        _check_unique_objects("changes", [change.object for change in changes])
        return changes


class SnapshotRequest(RequestModel):
    tag: SnapshotTag
    members: List[ObjectId] = Field(..., min_length=1)
    actor: str = Field(..., min_length=1)
    justification: str = ""
    txid: Optional[TxId] = None

    @field_validator("members")
    @classmethod
    def unique_members(cls, members):
        _check_unique_objects("members", members)
        return members


class _TargetedRequest(RequestModel):
    mode: RollbackMode
    tag: Optional[SnapshotTag] = None
    targets: Optional[List[Target]] = None
    actor: str = Field(..., min_length=1)
    justification: str = ""
    txid: Optional[TxId] = None

    @model_validator(mode="after")
    def mode_matches_selector(self):
        if self.mode == RollbackMode.SNAPSHOT:
            if self.tag is None or self.targets is not None:
                raise ValueError("Snapshot mode requires 'tag' and no 'targets'.")
        else:
            if not self.targets or self.tag is not None:
                raise ValueError(
                    "Selective mode requires a non-empty 'targets' list and no 'tag'."
                )
        return self


class RollbackRequest(_TargetedRequest):

    @model_validator(mode="after")
    def one_target_per_object(self):
        if self.targets:
            _check_unique_objects("targets", [target.object for target in self.targets])
        return self


class PruneRequest(_TargetedRequest):
    reason: PruneReason = PruneReason.OTHER
    reason_detail: str = ""

    @model_validator(mode="after")
    def unique_targets(self):
        if self.targets:
            pairs = [(target.object, target.version) for target in self.targets]
            if len(pairs) != len(set(pairs)):
                raise ValueError("'targets' must not repeat an (object, version) pair.")
        return self


class TxOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    txid: TxId
    op: Operation
    counter: U64
    checkpoint: AuthoritativeCheckpoint
    appended: Dict[str, int]
    replayed: bool = False
