"""
State core: the version catalog, snapshot registry and audit log PADs, the derived
lookup index over them, and checkpoint sealing, publication and classification.
"""

import os
from bisect import bisect_left
from collections import defaultdict
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

from rollguard._crash import CrashPoints
from rollguard._exceptions import PadError, StorageError, TamperDetected
from rollguard._hardware import HardwareRoot
from rollguard._merkle import PersistentPad, verify_inclusion
from rollguard.constants import (
    AUDIT_LOG,
    CATALOG,
    CHECKPOINT_DIR,
    CHECKPOINT_SLOTS,
    HOOK_CATALOG_LEAF_APPENDED,
    HOOK_CHECKPOINT_PERSISTED,
    HOOK_CHECKPOINT_STAGED,
    HOOK_COUNTER_ADVANCED,
    HOOK_ROOTS_COMPUTED,
    HOOK_SEALED,
    MAX_CHECKPOINT_LEAD,
    PAD_DIR,
    PAD_NAMES,
    REGISTRY,
    ROOT_TAG,
)
from rollguard.logger_conf import get_logger
from rollguard.models.base import Record
from rollguard.models.checkpoint import (
    Ambiguity,
    AuthoritativeCheckpoint,
    RecoveryNeeded,
)
from rollguard.models.leaves import (
    AuditKind,
    AuditRecord,
    HeadPointer,
    LeafKind,
    PadLeaf,
    SnapshotEntry,
    Tombstone,
    VersionEntry,
)
from rollguard.models.proofs import InclusionProof, PadRoot
from rollguard.utils import atomic_write, hex_to_digest, sha256

logger = get_logger(__name__)

PadSizes = Tuple[int, int, int]

PAD_KINDS = {
    CATALOG: (LeafKind.VERSION_ENTRY, LeafKind.HEAD_POINTER, LeafKind.TOMBSTONE),
    REGISTRY: (LeafKind.SNAPSHOT_ENTRY,),
    AUDIT_LOG: (LeafKind.INTENT_RECORD, LeafKind.COMPLETION_RECORD),
}


def decode_pad_record(pad: str, raw: bytes) -> Tuple[PadLeaf, Record]:
    """Decode a leaf of `pad`, rejecting kinds that do not belong to that PAD."""
    leaf = PadLeaf.decode(raw)
    if leaf.kind not in PAD_KINDS[pad]:
        raise ValueError(f"leaf kind {leaf.kind.name} does not belong to '{pad}'")
    return leaf, leaf.record()


def aggregate_root(hv: str, hs: str, hl: str) -> str:
    """R = H("ROOT" || H_catalog || H_registry || H_log), hex encoded."""
    return sha256(
        ROOT_TAG + hex_to_digest(hv) + hex_to_digest(hs) + hex_to_digest(hl)
    ).hex()


class VerifiedLeaf(NamedTuple):
    pad: str
    index: int
    record: Record
    proof: InclusionProof


# =============================================================================
# Derived index
# =============================================================================


class StateIndex:
    """
    Key -> leaf index maps over the three PADs. The index is a rebuildable cache:
    every answer is re-read from disk and verified before it is trusted. Entries
    carry their leaf index so queries can be pinned to any committed PAD size.
    """

    def __init__(self, head_tracking: str = "leaf"):
        self.head_tracking = head_tracking
        self.versions: Dict[Tuple[str, int], int] = {}
        self.first_version: Dict[str, int] = {}
        self.heads: Dict[str, List[Tuple[int, Optional[int]]]] = defaultdict(list)
        self.tombstones: Dict[Tuple[str, int], int] = {}
        self.digest_refs: Dict[str, List[Tuple[str, int]]] = defaultdict(list)
        self.tags: Dict[str, int] = {}
        self.snapshots: List[int] = []
        self.intents: Dict[str, List[int]] = defaultdict(list)
        self.completions: Dict[str, int] = {}

    def apply(self, pad: str, index: int, record: Record) -> None:
        if pad == CATALOG:
            self._apply_catalog(index, record)
        elif pad == REGISTRY:
            self.tags[record.tag] = index
            self.snapshots.append(index)
        elif record.kind == AuditKind.INTENT:
            self.intents[record.txid].append(index)
        else:
            self.completions[record.txid] = index

    def _apply_catalog(self, index: int, record: Record) -> None:
        if isinstance(record, VersionEntry):
            key = (record.object, record.version)
            self.versions[key] = index
            self.first_version.setdefault(record.object, index)
            self.digest_refs[record.content_digest].append(key)
            if self.head_tracking == "inline":
                self.heads[record.object].append((index, record.version))
        elif isinstance(record, HeadPointer):
            if self.head_tracking == "inline":
                raise PadError("Catalog holds head-pointer leaves but head tracking is inline.")
            self.heads[record.object].append((index, record.head_version))
        elif isinstance(record, Tombstone):
            self.tombstones[(record.object, record.version)] = index
            if self.head_tracking == "inline":
                head = self.head_at(record.object, index)
                if head is not None and head[1] == record.version:
                    self.heads[record.object].append((index, None))

    # -------------------------------------------------------------------------
    # As-of queries (leaf indices strictly below `size`)
    # -------------------------------------------------------------------------

    def knows_object(self, obj: str, size: int) -> bool:
        first = self.first_version.get(obj)
        return first is not None and first < size

    def version_leaf(self, obj: str, version: int, size: int) -> Optional[int]:
        index = self.versions.get((obj, version))
        return index if index is not None and index < size else None

    def tombstone_leaf(self, obj: str, version: int, size: int) -> Optional[int]:
        index = self.tombstones.get((obj, version))
        return index if index is not None and index < size else None

    def head_at(self, obj: str, size: int) -> Optional[Tuple[int, Optional[int]]]:
        entries = self.heads.get(obj)
        if not entries:
            return None
        position = bisect_left(entries, size, key=lambda entry: entry[0])
        return entries[position - 1] if position else None

    def tag_leaf(self, tag: str, size: int) -> Optional[int]:
        index = self.tags.get(tag)
        return index if index is not None and index < size else None

    def completion_leaf(self, txid: str, size: int) -> Optional[int]:
        index = self.completions.get(txid)
        return index if index is not None and index < size else None

    def referencing_versions(self, digest: str, size: int) -> List[Tuple[str, int]]:
        return [
            key for key in self.digest_refs.get(digest, []) if self.versions[key] < size
        ]

    def objects(self, size: int) -> List[str]:
        return sorted(obj for obj, first in self.first_version.items() if first < size)


# =============================================================================
# State store
# =============================================================================


class StateStore:

    def __init__(
        self,
        untrusted_dir: str,
        hardware: HardwareRoot,
        crash_points: Optional[CrashPoints] = None,
        head_tracking: str = "leaf",
    ):
        self.untrusted_dir = untrusted_dir
        self.hardware = hardware
        self.crash = crash_points or CrashPoints()
        self.head_tracking = head_tracking
        self.checkpoint_dir = os.path.join(untrusted_dir, CHECKPOINT_DIR)

        try:
            os.makedirs(os.path.join(untrusted_dir, PAD_DIR), exist_ok=True)
            os.makedirs(self.checkpoint_dir, exist_ok=True)
        except OSError as e:
            raise StorageError(f"Untrusted storage is unavailable: {e}") from e

        self.pads: Dict[str, PersistentPad] = {
            name: PersistentPad(name, os.path.join(untrusted_dir, PAD_DIR, f"{name}.pad"))
            for name in PAD_NAMES
        }
        self.index = StateIndex(head_tracking)
        self.checkpoint: Optional[AuthoritativeCheckpoint] = None

    @property
    def catalog(self) -> PersistentPad:
        return self.pads[CATALOG]

    @property
    def registry(self) -> PersistentPad:
        return self.pads[REGISTRY]

    @property
    def log(self) -> PersistentPad:
        return self.pads[AUDIT_LOG]

    def pad_sizes(self) -> PadSizes:
        return tuple(self.pads[name].size for name in PAD_NAMES)

    def changed_on_disk(self) -> bool:
        return any(pad.changed_on_disk() for pad in self.pads.values())

    def pad_roots(self, sizes: Optional[PadSizes] = None) -> Tuple[str, str, str]:
        sizes = sizes or self.pad_sizes()
        return tuple(
            self.pads[name].root(size).digest for name, size in zip(PAD_NAMES, sizes)
        )

    aggregate_root = staticmethod(aggregate_root)

    def hash_ops(self) -> int:
        return sum(pad.hash_ops for pad in self.pads.values())

    # -------------------------------------------------------------------------
    # Appends
    # -------------------------------------------------------------------------

    def append(self, pad_name: str, record: Record) -> int:
        pad = self.pads[pad_name]
        leaf = PadLeaf.from_record(record, pad.size)
        pad.append(leaf)
        self.index.apply(pad_name, leaf.index, record)
        if pad_name == CATALOG:
            self.crash.hook(HOOK_CATALOG_LEAF_APPENDED)
        return leaf.index

    # -------------------------------------------------------------------------
    # Checkpoints
    # -------------------------------------------------------------------------

    def slot_path(self, counter: int) -> str:
        return os.path.join(self.checkpoint_dir, CHECKPOINT_SLOTS[counter % 2])

    def seal_checkpoint(
        self, counter: int, sizes: Optional[PadSizes] = None, fire_hooks: bool = True
    ) -> AuthoritativeCheckpoint:
        sizes = sizes or self.pad_sizes()
        roots = self.pad_roots(sizes)
        root = aggregate_root(*roots)
        if fire_hooks:
            self.crash.hook(HOOK_ROOTS_COMPUTED)
        seal = self.hardware.seal(root, counter)
        if fire_hooks:
            self.crash.hook(HOOK_SEALED)
        return AuthoritativeCheckpoint(
            root=root, counter=counter, seal=seal, pad_sizes=sizes, pad_roots=roots
        )

    def persist_checkpoint(
        self, checkpoint: AuthoritativeCheckpoint, fire_hooks: bool = True
    ) -> None:
        staged = (lambda: self.crash.hook(HOOK_CHECKPOINT_STAGED)) if fire_hooks else None
        try:
            atomic_write(
                self.slot_path(checkpoint.counter), checkpoint.encode(), before_rename=staged
            )
        except OSError as e:
            raise StorageError(f"Checkpoint could not be persisted: {e}") from e

    def publish_checkpoint(self, counter_after_increment: int) -> AuthoritativeCheckpoint:
        """
        Seal the current PAD roots at `counter_after_increment`, persist the
        checkpoint, then advance the hardware counter. The checkpoint is durable
        before the counter moves.
        """
        expected = self.hardware.counter_read() + 1
        if counter_after_increment != expected:
            raise PadError(
                f"Publication at counter {counter_after_increment}, expected {expected}."
            )
        checkpoint = self.seal_checkpoint(counter_after_increment)
        self.persist_checkpoint(checkpoint)
        self.crash.hook(HOOK_CHECKPOINT_PERSISTED)
        advanced = self.hardware.counter_increment()
        if advanced != counter_after_increment:
            raise PadError(
                f"Hardware counter moved to {advanced}, expected {counter_after_increment}."
            )
        self.checkpoint = checkpoint
        self.crash.hook(HOOK_COUNTER_ADVANCED)
        return checkpoint

    def read_checkpoints(self) -> List[AuthoritativeCheckpoint]:
        checkpoints = []
        for name in CHECKPOINT_SLOTS:
            path = os.path.join(self.checkpoint_dir, name)
            if not os.path.exists(path):
                continue
            with open(path, "rb") as file:
                data = file.read()
            try:
                checkpoints.append(AuthoritativeCheckpoint.decode(data))
            except ValueError as e:
                logger.error("Checkpoint slot %s is unreadable: %s", name, e)
        return checkpoints

    def checkpoint_is_sealed(self, checkpoint: AuthoritativeCheckpoint) -> bool:
        return (
            self.hardware.verify_seal(checkpoint.seal, checkpoint.root, checkpoint.counter)
            and aggregate_root(*checkpoint.pad_roots) == checkpoint.root
        )

    def matches_storage(self, checkpoint: AuthoritativeCheckpoint) -> bool:
        """PAD files hold at least the checkpoint's leaves and reproduce its roots."""
        for name, size, root in zip(PAD_NAMES, checkpoint.pad_sizes, checkpoint.pad_roots):
            pad = self.pads[name]
            if pad.size < size or pad.root(size).digest != root:
                return False
        return True

    def is_fully_paired(self, log_size: int) -> bool:
        """Every completion follows an intent for the same txid and op, and the log
        prefix ends in a completion (or is empty)."""
        intents: Dict[str, str] = {}
        last_kind = None
        for index, raw in self.log.iter_raw(0, log_size):
            try:
                _, record = decode_pad_record(AUDIT_LOG, raw)
            except ValueError:
                logger.error(
                    "Audit log leaf %s does not decode.",
                    index,
                    extra={"pad": AUDIT_LOG, "index": index},
                )
                return False
            if record.kind == AuditKind.INTENT:
                intents[record.txid] = record.op
            elif intents.get(record.txid) != record.op:
                return False
            last_kind = record.kind
        return last_kind in (None, AuditKind.COMPLETION)

    def has_uncommitted_tail(self, checkpoint: AuthoritativeCheckpoint) -> bool:
        return self.pad_sizes() != tuple(checkpoint.pad_sizes) or any(
            pad.torn_bytes for pad in self.pads.values()
        )

    def is_pristine(self) -> bool:
        return not self.read_checkpoints() and not any(
            pad.size or pad.torn_bytes for pad in self.pads.values()
        )

    def genesis(self) -> AuthoritativeCheckpoint:
        """First boot: seal the empty PAD roots at counter 0."""
        checkpoint = self.seal_checkpoint(0, (0, 0, 0))
        self.persist_checkpoint(checkpoint)
        self.checkpoint = checkpoint
        logger.info("Initialized empty state at counter 0.", extra={"counter": 0})
        return checkpoint

    def load_latest_checkpoint(self) -> Union[AuthoritativeCheckpoint, RecoveryNeeded]:
        """
        Return the checkpoint that verifies at the current hardware counter and
        exactly describes the PAD files, or a classified recovery signal.
        """
        counter = self.hardware.counter_read()
        checkpoints = self.read_checkpoints()
        sealed = []
        for checkpoint in checkpoints:
            if self.checkpoint_is_sealed(checkpoint):
                sealed.append(checkpoint)
            else:
                logger.error(
                    "Checkpoint claiming counter %s fails seal verification.",
                    checkpoint.counter,
                    extra={"counter": checkpoint.counter},
                )

        if not sealed:
            return RecoveryNeeded(
                kind=Ambiguity.NONE,
                hardware_counter=counter,
                detail="no checkpoint on storage carries a valid seal",
            )
        if all(checkpoint.counter < counter for checkpoint in sealed):
            return RecoveryNeeded(
                kind=Ambiguity.BEHIND,
                hardware_counter=counter,
                candidates=sealed,
                detail=f"newest sealed checkpoint is {max(c.counter for c in sealed)}",
            )

        window = [
            checkpoint
            for checkpoint in sealed
            if counter <= checkpoint.counter <= counter + MAX_CHECKPOINT_LEAD
        ]
        candidates = sorted(
            (
                checkpoint
                for checkpoint in window
                if self.matches_storage(checkpoint)
                and self.is_fully_paired(checkpoint.log_size)
            ),
            key=lambda checkpoint: checkpoint.counter,
        )
        ahead = [checkpoint for checkpoint in sealed if checkpoint.counter > counter]
        current = [checkpoint for checkpoint in candidates if checkpoint.counter == counter]

        if ahead:
            return RecoveryNeeded(
                kind=Ambiguity.MULTIPLE if len(ahead) > 1 else Ambiguity.AHEAD,
                hardware_counter=counter,
                candidates=candidates,
                detail=f"checkpoint(s) at {[c.counter for c in ahead]} exceed the counter",
            )
        if not current:
            at_counter = [checkpoint for checkpoint in window if checkpoint.counter == counter]
            if at_counter:
                raise TamperDetected(
                    f"PAD files contradict the sealed checkpoint at counter {counter}."
                )
            return RecoveryNeeded(
                kind=Ambiguity.NONE,
                hardware_counter=counter,
                detail="no sealed checkpoint matches the PAD files",
            )
        if self.has_uncommitted_tail(current[0]):
            return RecoveryNeeded(
                kind=Ambiguity.UNCOMMITTED,
                hardware_counter=counter,
                candidates=candidates,
                detail="PAD files hold leaves beyond the sealed checkpoint",
            )
        return current[0]

    # -------------------------------------------------------------------------
    # Opening, truncation and index rebuild
    # -------------------------------------------------------------------------

    def reload(self) -> None:
        for pad in self.pads.values():
            pad.rebuild()
        self.checkpoint = None

    def rebuild_index(self) -> None:
        index = StateIndex(self.head_tracking)
        for name in PAD_NAMES:
            for position, raw in self.pads[name].iter_raw(0, self.pads[name].size):
                try:
                    _, record = decode_pad_record(name, raw)
                except ValueError as e:
                    raise TamperDetected(
                        f"PAD '{name}' leaf {position} does not decode: {e}",
                        pad=name,
                        index=position,
                    ) from e
                index.apply(name, position, record)
        if self.head_tracking == "leaf" and index.versions and not index.heads:
            raise PadError("Catalog has no head-pointer leaves but head tracking is 'leaf'.")
        self.index = index

    def adopt(self, checkpoint: AuthoritativeCheckpoint) -> None:
        self.checkpoint = checkpoint
        self.rebuild_index()

    def truncate_to(self, sizes: PadSizes) -> PadSizes:
        removed = tuple(
            self.pads[name].truncate(size) for name, size in zip(PAD_NAMES, sizes)
        )
        return removed

    # -------------------------------------------------------------------------
    # Verified reads
    # -------------------------------------------------------------------------

    def _pad_root(self, name: str, at: AuthoritativeCheckpoint) -> PadRoot:
        position = PAD_NAMES.index(name)
        return PadRoot(digest=at.pad_roots[position], size=at.pad_sizes[position])

    def _tampered(self, name: str, index: int, message: str) -> TamperDetected:
        logger.error(message, extra={"pad": name, "index": index})
        return TamperDetected(message, pad=name, index=index)

    def verified_leaf(
        self, name: str, index: int, at: AuthoritativeCheckpoint
    ) -> VerifiedLeaf:
        root = self._pad_root(name, at)
        if index >= root.size:
            raise PadError(f"Leaf {index} is beyond the committed size of '{name}'.")
        raw = self.pads[name].read_leaf(index)
        proof = self.pads[name].prove_inclusion(index, root.size)
        return self._verify(name, index, raw, proof, root)

    def _verify(
        self, name: str, index: int, raw: bytes, proof: InclusionProof, root: PadRoot
    ) -> VerifiedLeaf:
        if not verify_inclusion(proof, raw, root):
            raise self._tampered(
                name, index, f"PAD '{name}' leaf {index} fails inclusion under the root."
            )
        try:
            leaf, record = decode_pad_record(name, raw)
        except ValueError as e:
            raise self._tampered(
                name, index, f"PAD '{name}' leaf {index} is committed but malformed: {e}"
            ) from e
        if leaf.index != index:
            raise self._tampered(
                name, index, f"PAD '{name}' leaf {index} claims index {leaf.index}."
            )
        return VerifiedLeaf(pad=name, index=index, record=record, proof=proof)

    def scan_verified(
        self,
        name: str,
        at: AuthoritativeCheckpoint,
        start: int = 0,
        end: Optional[int] = None,
    ) -> Iterator[VerifiedLeaf]:
        root = self._pad_root(name, at)
        end = root.size if end is None else end
        for scanned in self.pads[name].scan(start, end, root.size):
            yield self._verify(name, scanned.proof.leaf_index, scanned.raw, scanned.proof, root)

    def _expect(self, verified: VerifiedLeaf, kind: type, **fields) -> VerifiedLeaf:
        record = verified.record
        if not isinstance(record, kind) or any(
            getattr(record, key) != value for key, value in fields.items()
        ):
            raise self._tampered(
                verified.pad,
                verified.index,
                f"Index entry for leaf {verified.index} of '{verified.pad}' points at "
                f"a different record.",
            )
        return verified

    def version_entry(
        self, obj: str, version: int, at: AuthoritativeCheckpoint
    ) -> Optional[VerifiedLeaf]:
        index = self.index.version_leaf(obj, version, at.catalog_size)
        if index is None:
            return None
        return self._expect(
            self.verified_leaf(CATALOG, index, at), VersionEntry, object=obj, version=version
        )

    def tombstone(
        self, obj: str, version: int, at: AuthoritativeCheckpoint
    ) -> Optional[VerifiedLeaf]:
        index = self.index.tombstone_leaf(obj, version, at.catalog_size)
        if index is None:
            return None
        return self._expect(
            self.verified_leaf(CATALOG, index, at), Tombstone, object=obj, version=version
        )

    def current_head(
        self, obj: str, at: AuthoritativeCheckpoint
    ) -> Optional[Tuple[int, str]]:
        """(version, content digest) of the live head, or None if unwritten or cleared."""
        entry = self.index.head_at(obj, at.catalog_size)
        if entry is None:
            return None
        leaf_index, head_version = entry
        verified = self.verified_leaf(CATALOG, leaf_index, at)

        if self.head_tracking == "leaf":
            self._expect(verified, HeadPointer, object=obj, head_version=head_version)
        elif head_version is None:
            self._expect(verified, Tombstone, object=obj)
        else:
            self._expect(verified, VersionEntry, object=obj, version=head_version)

        if head_version is None:
            return None
        version = self.version_entry(obj, head_version, at)
        if version is None:
            raise self._tampered(
                CATALOG, leaf_index, f"Head of '{obj}' names missing version {head_version}."
            )
        return head_version, version.record.content_digest

    def snapshot_entry(
        self, tag: str, at: AuthoritativeCheckpoint
    ) -> Optional[VerifiedLeaf]:
        index = self.index.tag_leaf(tag, at.registry_size)
        if index is None:
            return None
        return self._expect(self.verified_leaf(REGISTRY, index, at), SnapshotEntry, tag=tag)

    def completion(self, txid: str, at: AuthoritativeCheckpoint) -> Optional[VerifiedLeaf]:
        index = self.index.completion_leaf(txid, at.log_size)
        if index is None:
            return None
        verified = self._expect(self.verified_leaf(AUDIT_LOG, index, at), AuditRecord, txid=txid)
        if verified.record.kind != AuditKind.COMPLETION:
            raise self._tampered(AUDIT_LOG, index, f"Leaf {index} is not a completion record.")
        return verified

    def digest_is_live(self, digest: str, at: AuthoritativeCheckpoint) -> bool:
        """True if any committed, untombstoned version references `digest`."""
        for obj, version in self.index.referencing_versions(digest, at.catalog_size):
            self.version_entry(obj, version, at)
            if self.tombstone(obj, version, at) is None:
                return True
        return False

    def leaf_kinds(self, name: str) -> List[LeafKind]:
        pad = self.pads[name]
        return [PadLeaf.decode(raw).kind for _, raw in pad.iter_raw(0, pad.size)]
