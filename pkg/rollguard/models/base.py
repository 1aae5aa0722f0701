from typing import Annotated

from pydantic import AfterValidator, BaseModel, ConfigDict, Field

from rollguard.models.utils import (
    validate_digest,
    validate_object_id,
    validate_tag,
    validate_txid,
)
from rollguard.utils import canonical_json

U64_MAX = 2**64 - 1

U64 = Annotated[int, Field(ge=0, le=U64_MAX)]
ObjectId = Annotated[str, AfterValidator(lambda v: validate_object_id("object", v))]
SnapshotTag = Annotated[str, AfterValidator(lambda v: validate_tag("tag", v))]
Digest = Annotated[str, AfterValidator(lambda v: validate_digest("digest", v))]
TxId = Annotated[str, AfterValidator(lambda v: validate_txid("txid", v))]


class Record(BaseModel):
    """Immutable record with a canonical byte encoding."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.model_dump(mode="json"))

    @classmethod
    def from_canonical(cls, payload: bytes):
        return cls.model_validate_json(payload)
