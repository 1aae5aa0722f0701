import os
import threading
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Tuple, Union

from pydantic import ValidationError

from rollguard._audit import Auditor
from rollguard._content_store import ContentStore
from rollguard._crash import CrashPoints
from rollguard._exceptions import (
    AlreadyPruned,
    BlobNotFound,
    DeAuthorized,
    DuplicateTag,
    NoLiveHead,
    PolicyViolation,
    RecoveryHalted,
    RecoveryRequired,
    RequestInvalid,
    RollguardException,
    StaleStateDetected,
    UnknownObject,
    UnknownSnapshot,
    UnknownVersion,
)
from rollguard._hardware import HardwareRoot
from rollguard._state import StateStore
from rollguard.config import MonitorConfig
from rollguard.constants import (
    AUDIT_LOG,
    CATALOG,
    CONTENT_DIR,
    HOOK_CATALOG_EXTENDED,
    HOOK_COMPLETION_LOGGED,
    HOOK_INTENT_LOGGED,
    HOOK_PUBLISHED,
    HOOK_RECOVERY_SEALED,
    HOOK_REGISTRY_EXTENDED,
    HOOK_TARGETS_RESOLVED,
    HOOK_VALIDATED,
    PAD_NAMES,
    REGISTRY,
)
from rollguard.logger_conf import get_logger
from rollguard.models.checkpoint import (
    Ambiguity,
    AuthoritativeCheckpoint,
    RecoveryNeeded,
    RecoveryPolicy,
    RecoveryReport,
)
from rollguard.models.leaves import (
    AuditKind,
    AuditRecord,
    HeadPointer,
    Operation,
    PruneReason,
    SnapshotEntry,
    SnapshotMember,
    Tombstone,
    VersionEntry,
)
from rollguard.models.requests import (
    PruneRequest,
    RollbackMode,
    RollbackRequest,
    SnapshotRequest,
    Target,
    TxOutcome,
    UpdateRequest,
)
from rollguard.utils import new_txid, now_micros

logger = get_logger(__name__)

# Failures that leave PADs untouched beyond the intent record.
ABORTABLE = (RollguardException, ValidationError)


class _Transaction:
    """
    One in-flight protocol run. Tracks leaf counts and whether the catalog has been
    touched; a failure after that point requires recovery, a failure before it is a
    clean abort that leaves only the unsealed intent behind.
    """

    def __init__(
        self,
        monitor: "ReferenceMonitor",
        op: Operation,
        txid: str,
        actor: str,
        justification: str,
        scope: Dict,
    ):
        self.monitor = monitor
        self.state = monitor.state
        self.op = op
        self.txid = txid
        self.actor = actor
        self.justification = justification
        self.scope = scope
        self.at: AuthoritativeCheckpoint = monitor.state.checkpoint
        self.counter = self.at.counter + 1
        self.timestamp = monitor.timestamp(self.counter)
        self.appended = {name: 0 for name in PAD_NAMES}
        self.extending = False
        self.outcome: Optional[TxOutcome] = None

    def __enter__(self) -> "_Transaction":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc is None:
            return False
        if self.extending or not isinstance(exc, ABORTABLE):
            self.monitor.needs_recovery = True
            logger.error(
                "Transaction failed after extending state; recovery required.",
                extra={"txid": self.txid, "op": self.op.value},
                exc_info=(exc_type, exc, tb),
            )
        else:
            reason = getattr(exc, "reason", type(exc).__name__)
            logger.warning(
                "Aborted %s: %s (%s)",
                self.op.value,
                exc,
                reason,
                extra={"txid": self.txid, "op": self.op.value, "kind": reason},
            )
        return False

    def _append(self, pad: str, record) -> int:
        index = self.state.append(pad, record)
        self.appended[pad] += 1
        return index

    def _audit_record(self, kind: AuditKind, scope: Dict) -> AuditRecord:
        return AuditRecord(
            kind=kind,
            txid=self.txid,
            op=self.op,
            prior_root=self.at.root,
            actor=self.actor,
            justification=self.justification,
            scope=scope,
            timestamp=self.timestamp,
        )

    def begin(self) -> None:
        self._append(AUDIT_LOG, self._audit_record(AuditKind.INTENT, self.scope))
        self.monitor.crash.hook(HOOK_INTENT_LOGGED)

    def validated(self) -> None:
        self.monitor.crash.hook(HOOK_VALIDATED)

    def resolved(self) -> None:
        self.monitor.crash.hook(HOOK_TARGETS_RESOLVED)

    def catalog(self, records: List) -> None:
        self.extending = True
        for record in records:
            self._append(CATALOG, record)
        self.monitor.crash.hook(HOOK_CATALOG_EXTENDED)

    def registry(self, records: List) -> None:
        self.extending = True
        for record in records:
            self._append(REGISTRY, record)
        self.monitor.crash.hook(HOOK_REGISTRY_EXTENDED)

    def commit(self) -> TxOutcome:
        self.extending = True
        appended = dict(self.appended)
        appended[AUDIT_LOG] += 1
        catalog_size, registry_size, log_size = self.state.pad_sizes()
        completion_scope = {
            **self.scope,
            "counter": self.counter,
            "appended": appended,
            "pad_sizes": [catalog_size, registry_size, log_size + 1],
        }
        self._append(AUDIT_LOG, self._audit_record(AuditKind.COMPLETION, completion_scope))
        self.monitor.crash.hook(HOOK_COMPLETION_LOGGED)

        checkpoint = self.state.publish_checkpoint(self.counter)
        self.outcome = TxOutcome(
            txid=self.txid,
            op=self.op,
            counter=checkpoint.counter,
            checkpoint=checkpoint,
            appended=appended,
        )
        logger.info(
            "Committed %s at counter %s (catalog +%s, registry +%s, log +%s).",
            self.op.value,
            checkpoint.counter,
            appended[CATALOG],
            appended[REGISTRY],
            appended[AUDIT_LOG],
            extra={"txid": self.txid, "op": self.op.value, "counter": checkpoint.counter},
        )
        self.monitor.crash.hook(HOOK_PUBLISHED)
        return self.outcome


class ReferenceMonitor:
    """
    Mediates every state transition. One transaction runs at a time under the
    writer lock; reads go through `auditor`, pinned to the last published checkpoint.
    """

    def __init__(
        self,
        config: MonitorConfig,
        crash_points: Optional[CrashPoints] = None,
        auto_recover: bool = True,
    ):
        self.config = config
        self.crash = crash_points if crash_points is not None else CrashPoints.from_env()
        self.hardware = HardwareRoot(config.trusted_dir, self.crash)
        self.content = ContentStore(os.path.join(config.untrusted_dir, CONTENT_DIR))
        self.state = StateStore(
            config.untrusted_dir,
            self.hardware,
            crash_points=self.crash,
            head_tracking=config.head_tracking,
        )
        self.auditor = Auditor(self.state, self.hardware)
        self.needs_recovery = False
        self.pending: Optional[RecoveryNeeded] = None
        self.last_recovery: Optional[RecoveryReport] = None
        self.auto_recover = auto_recover
        self._lock = threading.RLock()
        self.open(auto_recover=auto_recover)

    @classmethod
    def for_directory(cls, data_dir: str, **overrides) -> "ReferenceMonitor":
        crash_points = overrides.pop("crash_points", None)
        auto_recover = overrides.pop("auto_recover", True)
        return cls(
            MonitorConfig.for_directory(data_dir, **overrides),
            crash_points=crash_points,
            auto_recover=auto_recover,
        )

    # -------------------------------------------------------------------------
    # Startup and recovery
    # -------------------------------------------------------------------------

    @contextmanager
    def _exclusive(self) -> Iterator[None]:
        """Writer lock for this handle and every other handle on the same trusted directory."""
        with self._lock, self.hardware.exclusive():
            yield

    def _classify(self) -> Union[AuthoritativeCheckpoint, RecoveryNeeded]:
        if self.hardware.counter_read() == 0 and self.state.is_pristine():
            return self.state.genesis()
        return self.state.load_latest_checkpoint()

    def refresh(self) -> bool:
        """
        Reopen storage when another handle has committed, recovered or left an
        intent since this one adopted its checkpoint. Returns True on a reopen.
        """
        with self._exclusive():
            if self.needs_recovery:
                return False
            at = self.state.checkpoint
            counter = self.hardware.counter_read()
            if at is not None and at.counter == counter and not self.state.changed_on_disk():
                return False
            logger.info(
                "Storage moved under another handle (counter %s, adopted %s); reopening.",
                counter,
                at.counter if at is not None else None,
                extra={"counter": counter},
            )
            self.state.reload()
            self.open(auto_recover=self.auto_recover)
            return True

    def open(self, auto_recover: bool = True) -> Union[AuthoritativeCheckpoint, RecoveryNeeded]:
        with self._exclusive():
            if self.state.changed_on_disk():
                self.state.reload()
            result = self._classify()
            if isinstance(result, AuthoritativeCheckpoint):
                self.state.adopt(result)
                self.needs_recovery = False
                self.pending = None
                return result

            self._refuse_stale(result)
            if auto_recover:
                return self.recover()
            self.needs_recovery = True
            self.pending = result
            logger.warning(
                "Storage needs recovery (%s): %s",
                result.kind.value,
                result.detail,
                extra={"kind": result.kind.value, "counter": result.hardware_counter},
            )
            return result

    def _refuse_stale(self, signal: RecoveryNeeded) -> None:
        if signal.kind == Ambiguity.BEHIND:
            logger.error(
                "Refusing stale storage: %s (hardware counter %s).",
                signal.detail,
                signal.hardware_counter,
                extra={"kind": signal.kind.value, "counter": signal.hardware_counter},
            )
            raise StaleStateDetected(
                f"Storage is behind the hardware counter {signal.hardware_counter}: "
                f"{signal.detail}."
            )

    def recover(self) -> AuthoritativeCheckpoint:
        """
        Reload storage and, if it is not at steady state, truncate the PADs to the
        newest paired candidate checkpoint, re-seal it at counter + 2 and
        double-increment the hardware counter.
        """
        with self._exclusive():
            self.state.reload()
            signal = self._classify()
            if isinstance(signal, AuthoritativeCheckpoint):
                self.state.adopt(signal)
                self.needs_recovery = False
                self.pending = None
                return signal

            self._refuse_stale(signal)
            if self.config.recovery_policy == RecoveryPolicy.HALT or not signal.candidates:
                self.needs_recovery = True
                self.pending = signal
                logger.error(
                    "Recovery halted (%s): %s",
                    signal.kind.value,
                    signal.detail,
                    extra={"kind": signal.kind.value, "counter": signal.hardware_counter},
                )
                raise RecoveryHalted(
                    f"Operator intervention required ({signal.kind.value}): {signal.detail}."
                )

            chosen = signal.candidates[-1]
            previous = self.hardware.counter_read()
            new_counter = previous + 2
            discarded = self.state.truncate_to(chosen.pad_sizes)

            checkpoint = self.state.seal_checkpoint(
                new_counter, tuple(chosen.pad_sizes), fire_hooks=False
            )
            self.state.persist_checkpoint(checkpoint, fire_hooks=False)
            self.crash.hook(HOOK_RECOVERY_SEALED)
            advanced = self.hardware.counter_double_increment()
            if advanced != new_counter:
                raise RecoveryHalted(
                    f"Hardware counter moved to {advanced} during recovery, "
                    f"expected {new_counter}."
                )

            self.state.adopt(checkpoint)
            self.last_recovery = RecoveryReport(
                ambiguity=signal.kind,
                chosen_counter=chosen.counter,
                previous_counter=previous,
                new_counter=new_counter,
                discarded_leaves=discarded,
                checkpoint=checkpoint,
                note=signal.detail,
            )
            self.needs_recovery = False
            self.pending = None
            logger.warning(
                "Recovered from %s: kept checkpoint %s, counter %s -> %s, discarded %s.",
                signal.kind.value,
                chosen.counter,
                previous,
                new_counter,
                list(discarded),
                extra={"kind": signal.kind.value, "counter": new_counter},
            )
            return checkpoint

    # -------------------------------------------------------------------------
    # Shared protocol helpers
    # -------------------------------------------------------------------------

    @property
    def checkpoint(self) -> AuthoritativeCheckpoint:
        return self.state.checkpoint

    def timestamp(self, counter: int) -> int:
        if self.config.clock == "counter":
            return counter * 1_000_000
        return now_micros()

    def _ensure_ready(self) -> None:
        self.refresh()
        if self.needs_recovery or self.state.checkpoint is None:
            raise RecoveryRequired(
                "The monitor must recover before accepting state changes.",
                kind=self.pending.kind.value if self.pending else Ambiguity.UNCOMMITTED.value,
            )

    def _authorize(self, op: Operation, actor: str) -> None:
        if not self.config.policy.permits(op, actor):
            raise PolicyViolation(f"Actor '{actor}' may not perform '{op.value}'.")

    def _replayed(
        self, op: Operation, txid: Optional[str]
    ) -> Optional[TxOutcome]:
        if txid is None:
            return None
        at = self.state.checkpoint
        completion = self.state.completion(txid, at)
        if completion is None:
            return None
        record = completion.record
        if record.op != op:
            raise RequestInvalid(
                f"Transaction id {txid} was already used for '{record.op.value}'."
            )
        logger.info("Replayed completed transaction.", extra={"txid": txid, "op": op.value})
        # the checkpoint the original commit published, re-derived from its PAD sizes
        original = self.state.seal_checkpoint(
            record.scope["counter"], tuple(record.scope["pad_sizes"]), fire_hooks=False
        )
        return TxOutcome(
            txid=txid,
            op=op,
            counter=original.counter,
            checkpoint=original,
            appended=record.scope["appended"],
            replayed=True,
        )

    def _begin(
        self, op: Operation, txid: Optional[str], actor: str, justification: str, scope: Dict
    ) -> _Transaction:
        return _Transaction(self, op, txid or new_txid(), actor, justification, scope)

    def _resolve_version(
        self, target: Target, at: AuthoritativeCheckpoint
    ) -> VersionEntry:
        verified = self.state.version_entry(target.object, target.version, at)
        if verified is None:
            if not self.state.index.knows_object(target.object, at.catalog_size):
                raise UnknownObject(f"Object '{target.object}' has no committed versions.")
            raise UnknownVersion(
                f"Object '{target.object}' has no committed version {target.version}."
            )
        return verified.record

    def _live_head(self, obj: str, at: AuthoritativeCheckpoint) -> Tuple[int, str]:
        head = self.state.current_head(obj, at)
        if head is None:
            if not self.state.index.knows_object(obj, at.catalog_size):
                raise UnknownObject(f"Object '{obj}' has no committed versions.")
            raise NoLiveHead(f"Object '{obj}' has no live head.")
        return head

    def _snapshot_targets(self, tag: str, at: AuthoritativeCheckpoint) -> List[Target]:
        verified = self.state.snapshot_entry(tag, at)
        if verified is None:
            raise UnknownSnapshot(f"Snapshot '{tag}' is not in the registry.")
        return [
            Target(object=member.object, version=member.version)
            for member in verified.record.members
        ]

    def _head_records(self, txid: str, obj: str, version: Optional[int]) -> List:
        if self.config.head_tracking == "leaf":
            return [HeadPointer(object=obj, head_version=version, txid=txid)]
        return []

    # -------------------------------------------------------------------------
    # State update
    # -------------------------------------------------------------------------

    def state_update(self, request: UpdateRequest) -> TxOutcome:
        with self._exclusive():
            self._ensure_ready()
            replay = self._replayed(Operation.UPDATE, request.txid)
            if replay is not None:
                return replay

            scope = {
                "objects": [change.object for change in request.changes],
                "snapshot": request.snapshot.tag if request.snapshot else None,
            }
            with self._begin(
                Operation.UPDATE, request.txid, request.actor, request.justification, scope
            ) as tx:
                tx.begin()
                at = tx.at

                self._authorize(Operation.UPDATE, request.actor)
                for change in request.changes:
                    if change.content_digest is not None:
                        try:
                            self.content.get_verified(change.content_digest)
                        except BlobNotFound as e:
                            raise RequestInvalid(
                                f"Content {change.content_digest} for '{change.object}' "
                                f"is not in the content store."
                            ) from e
                tx.validated()

                resolved = []
                for change in request.changes:
                    head = self.state.current_head(change.object, at)
                    digest = change.content_digest
                    if change.content is not None:
                        digest = self.content.put(change.content)
                    resolved.append((change.object, digest, head[0] if head else None))

                members = []
                if request.snapshot is not None:
                    if self.state.snapshot_entry(request.snapshot.tag, at) is not None:
                        raise DuplicateTag(f"Snapshot tag '{request.snapshot.tag}' is taken.")
                    changed = {obj for obj, _, _ in resolved}
                    for obj in request.snapshot.members or [obj for obj, _, _ in resolved]:
                        if obj in changed:
                            members.append(SnapshotMember(object=obj, version=tx.counter))
                        else:
                            version, _ = self._live_head(obj, at)
                            members.append(SnapshotMember(object=obj, version=version))
                tx.resolved()

                records = []
                for obj, digest, origin in resolved:
                    records.append(
                        VersionEntry(
                            object=obj,
                            version=tx.counter,
                            content_digest=digest,
                            origin=origin,
                            txid=tx.txid,
                            timestamp=tx.timestamp,
                        )
                    )
                    records.extend(self._head_records(tx.txid, obj, tx.counter))
                tx.catalog(records)

                snapshot = []
                if request.snapshot is not None:
                    snapshot.append(
                        SnapshotEntry(
                            tag=request.snapshot.tag,
                            members=members,
                            txid=tx.txid,
                            timestamp=tx.timestamp,
                        )
                    )
                tx.registry(snapshot)
                return tx.commit()

    # -------------------------------------------------------------------------
    # Snapshot
    # -------------------------------------------------------------------------

    def take_snapshot(
        self,
        tag: str,
        members: List[str],
        actor: str,
        justification: str = "",
        txid: Optional[str] = None,
    ) -> TxOutcome:
        request = SnapshotRequest(
            tag=tag, members=members, actor=actor, justification=justification, txid=txid
        )
        with self._exclusive():
            self._ensure_ready()
            replay = self._replayed(Operation.SNAPSHOT, request.txid)
            if replay is not None:
                return replay

            scope = {"tag": request.tag, "members": list(request.members)}
            with self._begin(
                Operation.SNAPSHOT, request.txid, request.actor, request.justification, scope
            ) as tx:
                tx.begin()
                at = tx.at

                self._authorize(Operation.SNAPSHOT, request.actor)
                tx.validated()

                if self.state.snapshot_entry(request.tag, at) is not None:
                    raise DuplicateTag(f"Snapshot tag '{request.tag}' is taken.")
                bound = []
                for obj in request.members:
                    version, _ = self._live_head(obj, at)
                    bound.append(SnapshotMember(object=obj, version=version))
                tx.resolved()

                tx.catalog([])
                tx.registry(
                    [
                        SnapshotEntry(
                            tag=request.tag,
                            members=bound,
                            txid=tx.txid,
                            timestamp=tx.timestamp,
                        )
                    ]
                )
                return tx.commit()

    # -------------------------------------------------------------------------
    # Rollback
    # -------------------------------------------------------------------------

    def rollback(self, request: RollbackRequest) -> TxOutcome:
        with self._exclusive():
            self._ensure_ready()
            replay = self._replayed(Operation.ROLLBACK, request.txid)
            if replay is not None:
                return replay

            scope = {
                "mode": request.mode.value,
                "tag": request.tag,
                "targets": [target.model_dump() for target in request.targets or []],
            }
            with self._begin(
                Operation.ROLLBACK, request.txid, request.actor, request.justification, scope
            ) as tx:
                tx.begin()
                at = tx.at

                self._authorize(Operation.ROLLBACK, request.actor)
                tx.validated()

                if request.mode == RollbackMode.SNAPSHOT:
                    targets = self._snapshot_targets(request.tag, at)
                else:
                    targets = list(request.targets)

                entries = []
                for target in targets:
                    entry = self._resolve_version(target, at)
                    tombstone = self.state.tombstone(target.object, target.version, at)
                    if tombstone is not None:
                        raise DeAuthorized(
                            f"Version {target.version} of '{target.object}' was pruned "
                            f"in transaction {tombstone.record.txid}."
                        )
                    if self.config.verify_content_on_rollback:
                        self.content.get_verified(entry.content_digest)
                    entries.append(entry)
                tx.resolved()

                records = []
                for entry in entries:
                    records.append(
                        VersionEntry(
                            object=entry.object,
                            version=tx.counter,
                            content_digest=entry.content_digest,
                            origin=entry.version,
                            txid=tx.txid,
                            timestamp=tx.timestamp,
                        )
                    )
                    records.extend(self._head_records(tx.txid, entry.object, tx.counter))
                tx.catalog(records)
                tx.registry([])
                return tx.commit()

    # -------------------------------------------------------------------------
    # Prune
    # -------------------------------------------------------------------------

    def prune(self, request: PruneRequest) -> TxOutcome:
        with self._exclusive():
            self._ensure_ready()
            replay = self._replayed(Operation.PRUNE, request.txid)
            if replay is not None:
                return replay

            scope = {
                "mode": request.mode.value,
                "tag": request.tag,
                "targets": [target.model_dump() for target in request.targets or []],
                "reason": request.reason.value,
            }
            with self._begin(
                Operation.PRUNE, request.txid, request.actor, request.justification, scope
            ) as tx:
                tx.begin()
                at = tx.at

                self._authorize(Operation.PRUNE, request.actor)
                tx.validated()

                if request.mode == RollbackMode.SNAPSHOT:
                    targets = self._snapshot_targets(request.tag, at)
                else:
                    targets = list(request.targets)

                entries = []
                for target in targets:
                    entry = self._resolve_version(target, at)
                    if self.state.tombstone(target.object, target.version, at) is not None:
                        raise AlreadyPruned(
                            f"Version {target.version} of '{target.object}' is already pruned."
                        )
                    entries.append(entry)
                heads = {
                    entry.object: self.state.current_head(entry.object, at)
                    for entry in entries
                }
                tx.resolved()

                records = []
                for entry in entries:
                    records.append(
                        Tombstone(
                            object=entry.object,
                            version=entry.version,
                            reason=request.reason,
                            reason_detail=request.reason_detail,
                            txid=tx.txid,
                            justification=request.justification,
                            timestamp=tx.timestamp,
                        )
                    )
                    head = heads[entry.object]
                    if head is not None and head[0] == entry.version:
                        records.extend(self._head_records(tx.txid, entry.object, None))
                tx.catalog(records)
                tx.registry([])
                outcome = tx.commit()

            if self.config.reclaim_on_prune:
                self._reclaim_pruned([entry.content_digest for entry in entries])
            return outcome

    def _reclaim_pruned(self, digests: List[str]) -> None:
        for digest in sorted(set(digests)):
            try:
                self.reclaim(digest)
            except RollguardException as e:
                logger.warning("Payload %s kept after prune: %s", digest, e)

    def reclaim(self, digest: str) -> bool:
        """Delete a payload once every version that references it is tombstoned."""
        with self._exclusive():
            self._ensure_ready()
            at = self.state.checkpoint
            return self.content.reclaim(
                digest, is_referenced=lambda d: self.state.digest_is_live(d, at)
            )

    # -------------------------------------------------------------------------
    # Retention
    # -------------------------------------------------------------------------

    def enforce_retention(
        self, actor: str, keep: Optional[int] = None
    ) -> Optional[TxOutcome]:
        """
        Keep the `keep` most recent snapshots; prune versions bound only by older
        snapshots and not serving as a current head.
        """
        if keep is None:
            keep = self.config.retention_snapshots
        if keep is None:
            return None
        if keep < 1:
            raise RequestInvalid(f"A retention window keeps at least one snapshot, got {keep}.")
        with self._exclusive():
            self._ensure_ready()
            at = self.state.checkpoint
            listings = self.auditor.list_snapshots(at)
            if len(listings) <= keep:
                return None

            retained = {
                (member.object, member.version)
                for listing in listings[-keep:]
                for member in listing.members
            }
            targets: Dict[Tuple[str, int], Target] = {}
            for listing in listings[:-keep]:
                pruned = {(m.object, m.version) for m in listing.pruned_members}
                for member in listing.members:
                    key = (member.object, member.version)
                    if key in retained or key in pruned or key in targets:
                        continue
                    head = self.state.current_head(member.object, at)
                    if head is not None and head[0] == member.version:
                        continue
                    targets[key] = member
            if not targets:
                return None

            return self.prune(
                PruneRequest(
                    mode=RollbackMode.SELECTIVE,
                    targets=list(targets.values()),
                    reason=PruneReason.RETENTION_EXPIRED,
                    actor=actor,
                    justification=f"retention window of {keep} snapshots",
                )
            )

    # -------------------------------------------------------------------------
    # Convenience
    # -------------------------------------------------------------------------

    def update(
        self,
        changes: Dict[str, bytes],
        actor: str,
        justification: str = "",
        snapshot_tag: Optional[str] = None,
        txid: Optional[str] = None,
    ) -> TxOutcome:
        """Build an `UpdateRequest` from an object -> bytes mapping."""
        return self.state_update(
            UpdateRequest(
                changes=[{"object": obj, "content": data} for obj, data in changes.items()],
                snapshot={"tag": snapshot_tag} if snapshot_tag else None,
                actor=actor,
                justification=justification,
                txid=txid,
            )
        )

    def read_object(self, obj: str) -> Optional[bytes]:
        """Verified content of the live head, or None when there is none."""
        head = self.state.current_head(obj, self.state.checkpoint)
        if head is None:
            return None
        return self.content.get_verified(head[1])
