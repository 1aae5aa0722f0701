import json
from typing import Dict, List, Optional, Tuple, Union

from rollguard._exceptions import StaleStateDetected, TamperDetected
from rollguard._hardware import HardwareRoot
from rollguard._state import StateStore, aggregate_root
from rollguard.constants import AUDIT_LOG, CATALOG, REGISTRY
from rollguard.logger_conf import get_logger
from rollguard.models.audit import (
    LINEAGE_FIELDS,
    EligibilityReport,
    LineageEvent,
    SnapshotListing,
    TombstoneEvidence,
    TransactionRecord,
)
from rollguard.models.checkpoint import AuthoritativeCheckpoint
from rollguard.models.leaves import (
    AuditKind,
    HeadPointer,
    Tombstone,
    VersionEntry,
)
from rollguard.models.requests import Target

logger = get_logger(__name__)


class Auditor:
    """
    Read-only queries. Every answer comes from leaves re-read from storage and
    verified by inclusion proof under one checkpoint, which must itself verify
    against the hardware counter.
    """

    def __init__(self, state: StateStore, hardware: HardwareRoot):
        self.state = state
        self.hardware = hardware

    def verify_checkpoint(self, checkpoint: AuthoritativeCheckpoint) -> bool:
        return (
            checkpoint.counter == self.hardware.counter_read()
            and aggregate_root(*checkpoint.pad_roots) == checkpoint.root
            and self.hardware.verify_seal(checkpoint.seal, checkpoint.root, checkpoint.counter)
        )

    def _pinned(self, at: Optional[AuthoritativeCheckpoint]) -> AuthoritativeCheckpoint:
        if at is None:
            at = self.state.checkpoint
            # a publication may land between reading the checkpoint and the counter
            if at is not None and not self.verify_checkpoint(at):
                at = self.state.checkpoint
        if at is None or not self.verify_checkpoint(at):
            raise StaleStateDetected("Audit queries require the current sealed checkpoint.")
        return at

    # -------------------------------------------------------------------------
    # Lineage
    # -------------------------------------------------------------------------

    def _descriptions(self, at: AuthoritativeCheckpoint) -> Dict[str, str]:
        descriptions = {}
        for verified in self.state.scan_verified(AUDIT_LOG, at):
            record = verified.record
            if record.kind == AuditKind.COMPLETION or record.txid not in descriptions:
                descriptions[record.txid] = record.justification
        return descriptions

    def reconstruct_lineage(
        self, obj: str, at: Optional[AuthoritativeCheckpoint] = None
    ) -> List[LineageEvent]:
        """
        Scan every catalog leaf, verifying each under the checkpoint, and emit an
        event whenever the object's head moves to a different version.
        `content_origin` is the first version that carried the same digest, or None
        when the digest is new for this object.
        """
        at = self._pinned(at)
        descriptions = self._descriptions(at)
        inline = self.state.head_tracking == "inline"

        versions: Dict[int, VersionEntry] = {}
        first_seen: Dict[str, int] = {}
        current: Optional[int] = None
        events: List[LineageEvent] = []

        def emit(entry: VersionEntry, leaf_index: int) -> None:
            events.append(
                LineageEvent(
                    object=obj,
                    version=entry.version,
                    leaf_index=leaf_index,
                    timestamp=entry.timestamp,
                    txid=entry.txid,
                    description=descriptions.get(entry.txid, ""),
                    origin=entry.origin,
                    content_origin=first_seen.get(entry.content_digest),
                    content_digest=entry.content_digest,
                )
            )
            first_seen.setdefault(entry.content_digest, entry.version)

        for verified in self.state.scan_verified(CATALOG, at):
            record = verified.record
            if record.object != obj:
                continue

            if isinstance(record, VersionEntry):
                versions[record.version] = record
                if inline:
                    current = record.version
                    emit(record, verified.index)
            elif isinstance(record, HeadPointer):
                if record.head_version is None:
                    current = None
                elif record.head_version != current:
                    entry = versions.get(record.head_version)
                    if entry is None:
                        logger.error(
                            "Lineage scan found a dangling head.",
                            extra={"pad": CATALOG, "index": verified.index},
                        )
                        raise TamperDetected(
                            f"Head of '{obj}' names version {record.head_version} "
                            f"with no earlier version entry.",
                            pad=CATALOG,
                            index=verified.index,
                        )
                    current = record.head_version
                    emit(entry, verified.index)
            elif isinstance(record, Tombstone) and inline and record.version == current:
                current = None

        return events

    @staticmethod
    def lineage_text(events: List[LineageEvent]) -> str:
        lines = ["\t".join(LINEAGE_FIELDS)]
        lines.extend(event.to_line() for event in events)
        return "\n".join(lines) + "\n"

    @staticmethod
    def lineage_json(events: List[LineageEvent]) -> str:
        rows = []
        for event in events:
            values = event.model_dump()
            rows.append({field: values[field] for field in LINEAGE_FIELDS})
        return json.dumps(rows, indent=2)

    # -------------------------------------------------------------------------
    # Snapshots and eligibility
    # -------------------------------------------------------------------------

    def list_snapshots(
        self, at: Optional[AuthoritativeCheckpoint] = None
    ) -> List[SnapshotListing]:
        at = self._pinned(at)
        listings = []
        for verified in self.state.scan_verified(REGISTRY, at):
            entry = verified.record
            members = [Target(object=m.object, version=m.version) for m in entry.members]
            pruned = [
                member
                for member in members
                if self.state.tombstone(member.object, member.version, at) is not None
            ]
            listings.append(
                SnapshotListing(
                    tag=entry.tag,
                    members=members,
                    txid=entry.txid,
                    timestamp=entry.timestamp,
                    leaf_index=verified.index,
                    pruned_members=pruned,
                )
            )
        return listings

    def _evidence(self, verified) -> TombstoneEvidence:
        record = verified.record
        return TombstoneEvidence(
            object=record.object,
            version=record.version,
            reason=record.reason,
            reason_detail=record.reason_detail,
            txid=record.txid,
            justification=record.justification,
            timestamp=record.timestamp,
            leaf_index=verified.index,
            proof=verified.proof,
        )

    def check_eligibility(
        self,
        target: Union[Target, Tuple[str, int]],
        tag: Optional[str] = None,
        at: Optional[AuthoritativeCheckpoint] = None,
    ) -> EligibilityReport:
        at = self._pinned(at)
        if not isinstance(target, Target):
            target = Target(object=target[0], version=target[1])

        version = self.state.version_entry(target.object, target.version, at)
        tombstone = self.state.tombstone(target.object, target.version, at)

        in_snapshot = None
        snapshot_proof = None
        if tag is not None:
            snapshot = self.state.snapshot_entry(tag, at)
            in_snapshot = snapshot is not None and any(
                member.object == target.object and member.version == target.version
                for member in snapshot.record.members
            )
            snapshot_proof = snapshot.proof if snapshot is not None else None

        return EligibilityReport(
            target=target,
            in_catalog=version is not None,
            catalog_proof=version.proof if version is not None else None,
            tombstoned=tombstone is not None,
            tombstone=self._evidence(tombstone) if tombstone is not None else None,
            in_snapshot=in_snapshot,
            snapshot_proof=snapshot_proof,
        )

    # -------------------------------------------------------------------------
    # Transactions and tombstones
    # -------------------------------------------------------------------------

    def list_transactions(
        self, at: Optional[AuthoritativeCheckpoint] = None
    ) -> List[TransactionRecord]:
        at = self._pinned(at)
        intents = {}
        completions = {}
        order: List[str] = []
        for verified in self.state.scan_verified(AUDIT_LOG, at):
            record = verified.record
            if record.kind == AuditKind.INTENT:
                if record.txid not in intents:
                    order.append(record.txid)
                intents[record.txid] = verified
            else:
                completions[record.txid] = verified

        transactions = []
        for txid in order:
            intent = intents[txid]
            completion = completions.get(txid)
            transactions.append(
                TransactionRecord(
                    txid=txid,
                    op=intent.record.op,
                    actor=intent.record.actor,
                    justification=intent.record.justification,
                    scope=intent.record.scope,
                    intent_index=intent.index,
                    completion_index=completion.index if completion else None,
                    prior_root=intent.record.prior_root,
                )
            )
        return transactions

    def list_tombstones(
        self, obj: Optional[str] = None, at: Optional[AuthoritativeCheckpoint] = None
    ) -> List[TombstoneEvidence]:
        at = self._pinned(at)
        return [
            self._evidence(verified)
            for verified in self.state.scan_verified(CATALOG, at)
            if isinstance(verified.record, Tombstone)
            and (obj is None or verified.record.object == obj)
        ]
