from typing import List

from pydantic import BaseModel, ConfigDict, model_validator

from rollguard.models.base import U64, Digest
from rollguard.models.leaves import PadLeaf


class PadRoot(BaseModel):
    model_config = ConfigDict(frozen=True)

    digest: Digest
    size: U64


class InclusionProof(BaseModel):
    model_config = ConfigDict(frozen=True)

    leaf_index: U64
    tree_size: U64
    path: List[Digest]

    @model_validator(mode="after")
    def check_path_length(self):
        if self.tree_size >= 1 and len(self.path) > max_path_length(self.tree_size):
            raise ValueError("Inclusion path is longer than ceil(log2(tree_size)).")
        return self


class ConsistencyProof(BaseModel):
    model_config = ConfigDict(frozen=True)

    old_size: U64
    new_size: U64
    path: List[Digest]

    @model_validator(mode="after")
    def check_sizes(self):
        if self.old_size > self.new_size:
            raise ValueError("old_size must not exceed new_size.")
        return self


def max_path_length(tree_size: int) -> int:
    if tree_size <= 1:
        return 0
    return (tree_size - 1).bit_length()


class ScannedLeaf(BaseModel):
    """A leaf read back from a PAD file together with its inclusion proof."""

    model_config = ConfigDict(frozen=True)

    leaf: PadLeaf
    raw: bytes
    proof: InclusionProof
