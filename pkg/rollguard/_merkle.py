"""
Append-only Merkle history tree and its on-disk persistent form.

Hashing follows RFC 6962: leaf hash = H(0x00 || leaf), interior node =
H(0x01 || left || right), and a tree of n > 1 leaves splits at the largest power
of two strictly smaller than n. Verification of inclusion and consistency proofs
uses the RFC 9162 algorithms so a verifier needs nothing but the proof, the leaf
and the root.
"""

import os
import threading
from typing import Iterator, List, Optional, Sequence, Tuple

from rollguard._exceptions import PadError, StorageError, TamperDetected
from rollguard.constants import (
    HASH_ALGORITHM_ID,
    LEAF_PREFIX,
    NODE_PREFIX,
    PAD_FORMAT_VERSION,
    PAD_HEADER_SIZE,
    PAD_LENGTH_PREFIX,
    PAD_MAGIC,
)
from rollguard.logger_conf import get_logger
from rollguard.models.leaves import PadLeaf
from rollguard.models.proofs import (
    ConsistencyProof,
    InclusionProof,
    PadRoot,
    ScannedLeaf,
)
from rollguard.utils import atomic_write, hex_to_digest, sha256

logger = get_logger(__name__)

EMPTY_ROOT = sha256(b"")


# =============================================================================
# Hashing primitives
# =============================================================================


def leaf_hash(encoded_leaf: bytes) -> bytes:
    return sha256(LEAF_PREFIX + encoded_leaf)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(NODE_PREFIX + left + right)


def split_point(size: int) -> int:
    """Largest power of two strictly smaller than `size` (size >= 2)."""
    return 1 << ((size - 1).bit_length() - 1)


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


# =============================================================================
# Proof verification
# =============================================================================


def verify_inclusion_path(
    leaf_digest: bytes,
    leaf_index: int,
    tree_size: int,
    path: Sequence[bytes],
    root: bytes,
) -> bool:
    if leaf_index >= tree_size:
        return False

    fn, sn = leaf_index, tree_size - 1
    result = leaf_digest
    for sibling in path:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            result = node_hash(sibling, result)
            while not fn & 1 and fn != 0:
                fn >>= 1
                sn >>= 1
        else:
            result = node_hash(result, sibling)
        fn >>= 1
        sn >>= 1

    return sn == 0 and result == root


def verify_consistency_path(
    old_size: int,
    new_size: int,
    old_root: bytes,
    new_root: bytes,
    path: Sequence[bytes],
) -> bool:
    if old_size > new_size:
        return False
    if old_size == 0:
        return not path
    if old_size == new_size:
        return not path and old_root == new_root
    if not path:
        return False

    path = list(path)
    if _is_power_of_two(old_size):
        path.insert(0, old_root)

    fn, sn = old_size - 1, new_size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1

    old_result = new_result = path[0]
    for node in path[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            old_result = node_hash(node, old_result)
            new_result = node_hash(node, new_result)
            while not fn & 1 and fn != 0:
                fn >>= 1
                sn >>= 1
        else:
            new_result = node_hash(new_result, node)
        fn >>= 1
        sn >>= 1

    return sn == 0 and old_result == old_root and new_result == new_root


def verify_inclusion(proof: InclusionProof, leaf: PadLeaf | bytes, root: PadRoot) -> bool:
    """True iff `leaf` sits at `proof.leaf_index` of the tree committed by `root`."""
    if proof.tree_size != root.size or proof.leaf_index >= root.size:
        return False
    encoded = leaf if isinstance(leaf, bytes) else leaf.encode()
    if isinstance(leaf, PadLeaf) and leaf.index != proof.leaf_index:
        return False
    return verify_inclusion_path(
        leaf_hash(encoded),
        proof.leaf_index,
        proof.tree_size,
        [hex_to_digest(node) for node in proof.path],
        hex_to_digest(root.digest),
    )


def verify_consistency(
    proof: ConsistencyProof, old_root: PadRoot, new_root: PadRoot
) -> bool:
    if proof.old_size != old_root.size or proof.new_size != new_root.size:
        return False
    return verify_consistency_path(
        proof.old_size,
        proof.new_size,
        hex_to_digest(old_root.digest),
        hex_to_digest(new_root.digest),
        [hex_to_digest(node) for node in proof.path],
    )


# =============================================================================
# In-memory history tree
# =============================================================================


class MerkleTree:
    """
    History tree over leaf hashes. `levels[h]` caches the hashes of every complete,
    aligned subtree of height h, so any aligned power-of-two range is one lookup and
    arbitrary ranges cost O(log n) node hashes.

    `hash_ops` counts node hashes computed by queries; benchmarks use it as a
    hardware-independent work measure.
    """

    def __init__(self, leaf_hashes: Optional[Sequence[bytes]] = None):
        self.levels: List[List[bytes]] = [[]]
        self.hash_ops = 0
        for digest in leaf_hashes or ():
            self.append(digest)

    @property
    def size(self) -> int:
        return len(self.levels[0])

    def append(self, digest: bytes) -> None:
        self.levels[0].append(digest)
        index = len(self.levels[0]) - 1
        height = 0
        while index & 1:
            nodes = self.levels[height]
            parent = node_hash(nodes[index - 1], nodes[index])
            height += 1
            if len(self.levels) == height:
                self.levels.append([])
            self.levels[height].append(parent)
            index >>= 1

    def truncate(self, size: int) -> None:
        if size > self.size:
            raise PadError(f"Cannot truncate a tree of size {self.size} to {size}.")
        leaves = self.levels[0][:size]
        self.levels = [[]]
        for digest in leaves:
            self.append(digest)

    def leaf(self, index: int) -> bytes:
        return self.levels[0][index]

    def root(self, size: Optional[int] = None) -> bytes:
        size = self.size if size is None else size
        if size > self.size:
            raise PadError(f"Tree has {self.size} leaves, no root at size {size}.")
        if size == 0:
            return EMPTY_ROOT
        return self.subtree_hash(0, size)

    def subtree_hash(self, start: int, size: int) -> bytes:
        if _is_power_of_two(size) and start % size == 0:
            height = size.bit_length() - 1
            if height < len(self.levels):
                nodes = self.levels[height]
                position = start >> height
                if position < len(nodes):
                    return nodes[position]

        k = split_point(size)
        left = self.subtree_hash(start, k)
        right = self.subtree_hash(start + k, size - k)
        self.hash_ops += 1
        return node_hash(left, right)

    def inclusion_path(self, index: int, size: int) -> List[bytes]:
        if not 0 <= index < size <= self.size:
            raise PadError(
                f"No inclusion path for leaf {index} in a tree of size {size} "
                f"(current size {self.size})."
            )
        return self._path(index, 0, size)

    def _path(self, index: int, start: int, size: int) -> List[bytes]:
        if size == 1:
            return []
        k = split_point(size)
        if index < k:
            return self._path(index, start, k) + [self.subtree_hash(start + k, size - k)]
        return self._path(index - k, start + k, size - k) + [
            self.subtree_hash(start, k)
        ]

    def consistency_path(self, old_size: int, new_size: int) -> List[bytes]:
        if not 0 <= old_size <= new_size <= self.size:
            raise PadError(
                f"No consistency proof from size {old_size} to {new_size} "
                f"(current size {self.size})."
            )
        if old_size == 0 or old_size == new_size:
            return []
        return self._subproof(old_size, 0, new_size, True)

    def _subproof(self, m: int, start: int, size: int, complete: bool) -> List[bytes]:
        if m == size:
            return [] if complete else [self.subtree_hash(start, size)]
        k = split_point(size)
        if m <= k:
            return self._subproof(m, start, k, complete) + [
                self.subtree_hash(start + k, size - k)
            ]
        return self._subproof(m - k, start + k, size - k, False) + [
            self.subtree_hash(start, k)
        ]


# =============================================================================
# Persistent PAD
# =============================================================================


def pad_header() -> bytes:
    return (
        PAD_MAGIC
        + PAD_FORMAT_VERSION.to_bytes(2, "big")
        + HASH_ALGORITHM_ID.to_bytes(2, "big")
        + bytes(PAD_HEADER_SIZE - len(PAD_MAGIC) - 4)
    )


class PersistentPad:
    """
    One PAD on untrusted storage: a 16-byte header followed by length-prefixed
    (little-endian u32) canonical leaf encodings. The leaf file is the only
    persistent state; the tree and the offset index are rebuilt from it at open.
    """

    def __init__(self, name: str, path: str):
        self.name = name
        self.path = path
        self.tree = MerkleTree()
        self._offsets: List[int] = []
        self._end = PAD_HEADER_SIZE
        self.torn_bytes = 0
        self._lock = threading.RLock()
        self._load()

    # -------------------------------------------------------------------------
    # Loading
    # -------------------------------------------------------------------------

    def _load(self) -> None:
        if not os.path.exists(self.path):
            try:
                atomic_write(self.path, pad_header())
            except OSError as e:
                raise StorageError(f"Cannot create PAD file '{self.path}': {e}") from e

        with open(self.path, "rb") as file:
            header = file.read(PAD_HEADER_SIZE)
            self._check_header(header)
            offset = PAD_HEADER_SIZE
            while True:
                prefix = file.read(PAD_LENGTH_PREFIX)
                if not prefix:
                    break
                length = int.from_bytes(prefix, "little") if len(prefix) == 4 else -1
                data = file.read(length) if length >= 0 else b""
                if length < 0 or len(data) != length:
                    self.torn_bytes = os.path.getsize(self.path) - offset
                    logger.warning(
                        "PAD '%s' has a torn tail of %s bytes.",
                        self.name,
                        self.torn_bytes,
                        extra={"pad": self.name, "index": len(self._offsets)},
                    )
                    break
                self._offsets.append(offset)
                self.tree.append(leaf_hash(data))
                offset += PAD_LENGTH_PREFIX + length
            self._end = offset

    def _check_header(self, header: bytes) -> None:
        if len(header) != PAD_HEADER_SIZE or header[: len(PAD_MAGIC)] != PAD_MAGIC:
            raise TamperDetected(f"PAD '{self.name}' has a corrupt header.", pad=self.name)
        version = int.from_bytes(header[8:10], "big")
        algorithm = int.from_bytes(header[10:12], "big")
        if version != PAD_FORMAT_VERSION or algorithm != HASH_ALGORITHM_ID:
            raise PadError(
                f"PAD '{self.name}' uses format {version} / hash {algorithm}, "
                f"expected {PAD_FORMAT_VERSION} / {HASH_ALGORITHM_ID}."
            )

    # -------------------------------------------------------------------------
    # Mutation
    # -------------------------------------------------------------------------

    @property
    def size(self) -> int:
        return self.tree.size

    def append(self, leaf: PadLeaf) -> PadRoot:
        with self._lock:
            if leaf.index != self.size:
                raise PadError(
                    f"Leaf index {leaf.index} does not match PAD '{self.name}' "
                    f"size {self.size}."
                )
            if self.torn_bytes:
                raise PadError(
                    f"PAD '{self.name}' has an uncommitted tail; recovery must run first."
                )

            encoded = leaf.encode()
            record = len(encoded).to_bytes(PAD_LENGTH_PREFIX, "little") + encoded
            try:
                with open(self.path, "r+b") as file:
                    file.seek(self._end)
                    file.write(record)
                    file.flush()
                    os.fsync(file.fileno())
            except OSError as e:
                self._discard_partial_write()
                raise StorageError(
                    f"Append to PAD '{self.name}' was not durable: {e}"
                ) from e

            self._offsets.append(self._end)
            self._end += len(record)
            self.tree.append(leaf_hash(encoded))
            return self.root()

    def _discard_partial_write(self) -> None:
        try:
            with open(self.path, "r+b") as file:
                file.truncate(self._end)
                os.fsync(file.fileno())
        except OSError:
            logger.exception("Could not roll back a partial append.", extra={"pad": self.name})

    def truncate(self, size: int) -> int:
        """Drop every leaf at index >= `size` and any torn tail. Returns leaves removed."""
        with self._lock:
            if size > self.size:
                raise PadError(
                    f"PAD '{self.name}' has {self.size} leaves, cannot keep {size}."
                )
            removed = self.size - size
            end = self._offsets[size] if size < self.size else self._end
            with open(self.path, "r+b") as file:
                file.truncate(end)
                file.flush()
                os.fsync(file.fileno())
            del self._offsets[size:]
            self._end = end
            self.torn_bytes = 0
            self.tree.truncate(size)
            if removed:
                logger.warning(
                    "Discarded %s uncommitted leaves from PAD '%s'.",
                    removed,
                    self.name,
                    extra={"pad": self.name, "index": size},
                )
            return removed

    def changed_on_disk(self) -> bool:
        """True when the leaf file no longer has the length this handle loaded or wrote."""
        try:
            return os.path.getsize(self.path) != self._end + self.torn_bytes
        except OSError:
            return True

    def rebuild(self) -> None:
        """Drop all derived state and reload it from the leaf file."""
        with self._lock:
            self.tree = MerkleTree()
            self._offsets = []
            self._end = PAD_HEADER_SIZE
            self.torn_bytes = 0
            self._load()

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    def root(self, at_size: Optional[int] = None) -> PadRoot:
        size = self.size if at_size is None else at_size
        return PadRoot(digest=self.tree.root(size).hex(), size=size)

    @property
    def hash_ops(self) -> int:
        return self.tree.hash_ops

    def read_leaf(self, index: int) -> bytes:
        if not 0 <= index < self.size:
            raise PadError(f"PAD '{self.name}' has no leaf {index}.")
        with open(self.path, "rb") as file:
            return self._read_at(file, index)

    def _read_at(self, file, index: int) -> bytes:
        file.seek(self._offsets[index])
        length = int.from_bytes(file.read(PAD_LENGTH_PREFIX), "little")
        return file.read(length)

    def prove_inclusion(self, index: int, at_size: Optional[int] = None) -> InclusionProof:
        size = self.size if at_size is None else at_size
        path = self.tree.inclusion_path(index, size)
        return InclusionProof(
            leaf_index=index, tree_size=size, path=[node.hex() for node in path]
        )

    def prove_consistency(self, old_size: int, new_size: Optional[int] = None) -> ConsistencyProof:
        new_size = self.size if new_size is None else new_size
        path = self.tree.consistency_path(old_size, new_size)
        return ConsistencyProof(
            old_size=old_size, new_size=new_size, path=[node.hex() for node in path]
        )

    def iter_raw(self, start: int, end: int) -> Iterator[Tuple[int, bytes]]:
        if not 0 <= start <= end <= self.size:
            raise PadError(
                f"Range [{start}, {end}) is outside PAD '{self.name}' of size {self.size}."
            )
        if start == end:
            return
        with open(self.path, "rb") as file:
            for index in range(start, end):
                yield index, self._read_at(file, index)

    def scan(
        self, start: int, end: int, at_size: Optional[int] = None
    ) -> List[ScannedLeaf]:
        """
        Leaves in [start, end) read back from disk, each decoded and paired with an
        inclusion proof at `at_size` (defaults to the current size). The proofs are
        not checked here; callers verify them against an authenticated root.
        """
        at_size = self.size if at_size is None else at_size
        if end > at_size:
            raise PadError(f"Scan end {end} exceeds the proven size {at_size}.")

        scanned = []
        for index, raw in self.iter_raw(start, end):
            try:
                leaf = PadLeaf.decode(raw)
            except ValueError as e:
                logger.error(
                    "PAD '%s' leaf %s cannot be decoded.",
                    self.name,
                    index,
                    extra={"pad": self.name, "index": index},
                )
                raise TamperDetected(
                    f"PAD '{self.name}' leaf {index} cannot be decoded: {e}",
                    pad=self.name,
                    index=index,
                ) from e
            scanned.append(
                ScannedLeaf(leaf=leaf, raw=raw, proof=self.prove_inclusion(index, at_size))
            )
        return scanned
