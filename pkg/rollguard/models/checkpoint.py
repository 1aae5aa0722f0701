import struct
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from rollguard.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from rollguard.models.base import U64, Digest

# magic | format version | root | counter | seal tag | pad sizes | pad roots
CHECKPOINT_LAYOUT = struct.Struct(">8sH32sQ32sQQQ32s32s32s")


class Seal(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: Digest = Field(..., description="HMAC-SHA256 authenticator, hex.")
    counter: U64
    root: Digest


class AuthoritativeCheckpoint(BaseModel):
    """(root R, counter c, seal) plus the per-PAD sizes and roots R aggregates."""

    model_config = ConfigDict(frozen=True)

    root: Digest
    counter: U64
    seal: Seal
    pad_sizes: Tuple[U64, U64, U64]
    pad_roots: Tuple[Digest, Digest, Digest]

    @property
    def catalog_size(self) -> int:
        return self.pad_sizes[0]

    @property
    def registry_size(self) -> int:
        return self.pad_sizes[1]

    @property
    def log_size(self) -> int:
        return self.pad_sizes[2]

    def encode(self) -> bytes:
        return CHECKPOINT_LAYOUT.pack(
            CHECKPOINT_MAGIC,
            CHECKPOINT_FORMAT_VERSION,
            bytes.fromhex(self.root),
            self.counter,
            bytes.fromhex(self.seal.tag),
            *self.pad_sizes,
            *(bytes.fromhex(root) for root in self.pad_roots),
        )

    @classmethod
    def decode(cls, data: bytes) -> "AuthoritativeCheckpoint":
        if len(data) != CHECKPOINT_LAYOUT.size:
            raise ValueError(
                f"Checkpoint must be {CHECKPOINT_LAYOUT.size} bytes, got {len(data)}."
            )
        (
            magic,
            version,
            root,
            counter,
            tag,
            catalog_size,
            registry_size,
            log_size,
            catalog_root,
            registry_root,
            log_root,
        ) = CHECKPOINT_LAYOUT.unpack(data)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("Checkpoint magic mismatch.")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"Unsupported checkpoint format version {version}.")
        return cls(
            root=root.hex(),
            counter=counter,
            seal=Seal(tag=tag.hex(), counter=counter, root=root.hex()),
            pad_sizes=(catalog_size, registry_size, log_size),
            pad_roots=(catalog_root.hex(), registry_root.hex(), log_root.hex()),
        )


class Ambiguity(str, Enum):
    AHEAD = "ahead"
    BEHIND = "behind"
    MULTIPLE = "multiple"
    NONE = "none"
    UNCOMMITTED = "uncommitted"


class RecoveryNeeded(BaseModel):
    """Signal returned instead of a checkpoint when storage is not at steady state."""

    model_config = ConfigDict(frozen=True)

    kind: Ambiguity
    hardware_counter: U64
    candidates: List[AuthoritativeCheckpoint] = Field(default_factory=list)
    detail: str = ""

    @property
    def recoverable(self) -> bool:
        return self.kind in (Ambiguity.AHEAD, Ambiguity.MULTIPLE, Ambiguity.UNCOMMITTED)


class RecoveryPolicy(str, Enum):
    LATEST_PAIRED = "latest_paired"
    HALT = "halt"


class RecoveryReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    ambiguity: Ambiguity
    chosen_counter: U64
    previous_counter: U64
    new_counter: U64
    discarded_leaves: Tuple[U64, U64, U64]
    checkpoint: AuthoritativeCheckpoint
    note: Optional[str] = None
