from .audit import EligibilityReport, LineageEvent, SnapshotListing, TransactionRecord
from .checkpoint import AuthoritativeCheckpoint, RecoveryNeeded, RecoveryReport, Seal
from .leaves import (
    AuditRecord,
    HeadPointer,
    Operation,
    PadLeaf,
    PruneReason,
    SnapshotEntry,
    Tombstone,
    VersionEntry,
)
from .proofs import ConsistencyProof, InclusionProof, PadRoot
from .requests import (
    ObjectChange,
    PruneRequest,
    RollbackMode,
    RollbackRequest,
    SnapshotRequest,
    Target,
    TxOutcome,
    UpdateRequest,
)
