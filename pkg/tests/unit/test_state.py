import pytest

from rollguard._exceptions import PadError, PolicyViolation, StaleStateDetected, TamperDetected
from rollguard._merkle import EMPTY_ROOT
from rollguard._state import StateIndex, aggregate_root
from rollguard.constants import AUDIT_LOG, CATALOG, REGISTRY
from rollguard.harness.storage import restore_untrusted, snapshot_untrusted, tamper_leaf
from rollguard.models.checkpoint import Ambiguity
from rollguard.models.leaves import HeadPointer, LeafKind, Tombstone, VersionEntry

from ..conftest import ACTOR

TXID = "0123456789abcdef0123456789abcdef"


def _untrusted(monitor) -> str:
    return monitor.config.untrusted_dir


# =============================================================================
# Derived index
# =============================================================================


def _version(obj, version, digest="a" * 64):
    return VersionEntry(
        object=obj, version=version, content_digest=digest, txid=TXID, timestamp=version
    )


def test_index_heads_in_leaf_mode():

    index = StateIndex("leaf")
    index.apply(CATALOG, 0, _version("a", 1))
    index.apply(CATALOG, 1, HeadPointer(object="a", head_version=1, txid=TXID))
    index.apply(CATALOG, 2, _version("a", 2))
    index.apply(CATALOG, 3, HeadPointer(object="a", head_version=2, txid=TXID))

    assert index.head_at("a", 0) is None
    assert index.head_at("a", 2) == (1, 1)
    assert index.head_at("a", 3) == (1, 1)
    assert index.head_at("a", 4) == (3, 2)
    assert index.version_leaf("a", 2, 2) is None
    assert index.version_leaf("a", 2, 3) == 2
    assert index.knows_object("a", 1)
    assert not index.knows_object("b", 4)
    assert index.objects(4) == ["a"]


def test_index_heads_in_inline_mode():

    index = StateIndex("inline")
    index.apply(CATALOG, 0, _version("a", 1))
    index.apply(CATALOG, 1, _version("a", 2, digest="b" * 64))
    index.apply(
        CATALOG,
        2,
        Tombstone(object="a", version=2, reason="cve", txid=TXID, justification="", timestamp=3),
    )

    assert index.head_at("a", 1) == (0, 1)
    assert index.head_at("a", 2) == (1, 2)
    # pruning the head version clears it
    assert index.head_at("a", 3) == (2, None)
    assert index.tombstone_leaf("a", 2, 3) == 2
    assert index.referencing_versions("b" * 64, 3) == [("a", 2)]

    with pytest.raises(PadError):
        index.apply(CATALOG, 3, HeadPointer(object="a", head_version=1, txid=TXID))


# =============================================================================
# Checkpoints
# =============================================================================


def test_genesis_seals_empty_roots(monitor):

    checkpoint = monitor.checkpoint
    empty = EMPTY_ROOT.hex()
    assert checkpoint.counter == 0
    assert checkpoint.pad_sizes == (0, 0, 0)
    assert checkpoint.pad_roots == (empty, empty, empty)
    assert checkpoint.root == aggregate_root(empty, empty, empty)
    assert monitor.hardware.counter_read() == 0


def test_commit_publishes_to_alternating_slots(monitor):

    first = monitor.update({"a": b"v1"}, actor=ACTOR).checkpoint
    second = monitor.update({"a": b"v2"}, actor=ACTOR).checkpoint

    assert monitor.state.slot_path(first.counter) != monitor.state.slot_path(second.counter)
    assert sorted(c.counter for c in monitor.state.read_checkpoints()) == [1, 2]
    assert monitor.state.load_latest_checkpoint() == second
    assert second.pad_roots == monitor.state.pad_roots()


def test_reopen_adopts_current_checkpoint(make_monitor):

    monitor = make_monitor("store")
    checkpoint = monitor.update({"a": b"v1", "b": b"v1"}, actor=ACTOR).checkpoint

    reopened = make_monitor("store")
    assert reopened.checkpoint == checkpoint
    assert reopened.last_recovery is None
    assert reopened.state.current_head("a", checkpoint)[0] == 1


def test_replayed_storage_is_behind(make_monitor):

    monitor = make_monitor("store")
    monitor.update({"a": b"v1"}, actor=ACTOR)
    old = snapshot_untrusted(_untrusted(monitor))
    monitor.update({"a": b"v2"}, actor=ACTOR)

    restore_untrusted(_untrusted(monitor), old)
    signal = monitor.state.load_latest_checkpoint()
    assert signal.kind == Ambiguity.BEHIND
    assert signal.hardware_counter == 2

    with pytest.raises(StaleStateDetected):
        make_monitor("store")


def test_tampered_committed_leaf_contradicts_checkpoint(make_monitor):

    monitor = make_monitor("store")
    monitor.update({"a": b"v1"}, actor=ACTOR)
    tamper_leaf(_untrusted(monitor), CATALOG, 0, "flip", byte=20)

    with pytest.raises(TamperDetected):
        make_monitor("store")


def test_truncated_pad_contradicts_checkpoint(make_monitor):

    monitor = make_monitor("store")
    monitor.update({"a": b"v1"}, actor=ACTOR)
    monitor.update({"a": b"v2"}, actor=ACTOR)
    tamper_leaf(_untrusted(monitor), AUDIT_LOG, 2, "truncate")

    with pytest.raises(TamperDetected):
        make_monitor("store")


def test_aborted_intent_is_uncommitted_tail(make_monitor):

    monitor = make_monitor("store", policy={"allow": {"update": ["bob"]}})
    with pytest.raises(PolicyViolation):
        monitor.update({"a": b"v1"}, actor=ACTOR)

    assert monitor.state.pad_sizes() == (0, 0, 1)
    signal = monitor.state.load_latest_checkpoint()
    assert signal.kind == Ambiguity.UNCOMMITTED
    assert [c.counter for c in signal.candidates] == [0]


# =============================================================================
# Verified reads
# =============================================================================


def test_verified_reads_are_pinned_to_checkpoint(monitor):

    first = monitor.update({"a": b"v1"}, actor=ACTOR).checkpoint
    monitor.update({"a": b"v2"}, actor=ACTOR)

    assert monitor.state.current_head("a", first)[0] == 1
    assert monitor.state.current_head("a", monitor.checkpoint)[0] == 2
    assert monitor.state.version_entry("a", 2, first) is None

    with pytest.raises(PadError):
        monitor.state.verified_leaf(CATALOG, 2, first)


def test_leaf_kinds_follow_head_tracking(make_monitor):

    leaf = make_monitor("leaf", head_tracking="leaf")
    leaf.update({"a": b"v1", "b": b"v1"}, actor=ACTOR, snapshot_tag="r1")
    assert leaf.state.leaf_kinds(CATALOG) == [
        LeafKind.VERSION_ENTRY,
        LeafKind.HEAD_POINTER,
        LeafKind.VERSION_ENTRY,
        LeafKind.HEAD_POINTER,
    ]
    assert leaf.state.leaf_kinds(REGISTRY) == [LeafKind.SNAPSHOT_ENTRY]
    assert leaf.state.leaf_kinds(AUDIT_LOG) == [
        LeafKind.INTENT_RECORD,
        LeafKind.COMPLETION_RECORD,
    ]

    inline = make_monitor("inline", head_tracking="inline")
    inline.update({"a": b"v1", "b": b"v1"}, actor=ACTOR)
    assert inline.state.leaf_kinds(CATALOG) == [LeafKind.VERSION_ENTRY, LeafKind.VERSION_ENTRY]
    assert inline.state.current_head("b", inline.checkpoint)[0] == 1


def test_scan_verified_reports_tampered_index(monitor):

    monitor.update({"a": b"v1"}, actor=ACTOR)
    checkpoint = monitor.checkpoint
    tamper_leaf(_untrusted(monitor), AUDIT_LOG, 1, "flip", byte=30)
    monitor.state.log.rebuild()

    with pytest.raises(TamperDetected) as exc_info:
        list(monitor.state.scan_verified(AUDIT_LOG, checkpoint, start=1))
    assert exc_info.value.pad == AUDIT_LOG
    assert exc_info.value.index == 1
