import pytest
from pydantic import ValidationError

from rollguard._exceptions import (
    DeAuthorized,
    PolicyViolation,
    RecoveryHalted,
    RecoveryRequired,
    RequestInvalid,
    StaleStateDetected,
    TamperDetected,
)
from rollguard.service import Gateway, LocalClient, ServiceError, error_response
from rollguard.service.schemas import (
    ChangeBody,
    PruneBody,
    RollbackBody,
    StateUpdateBody,
    TakeSnapshotBody,
)
from rollguard.utils import content_digest, txid_from_key

from ...conftest import ACTOR

TOKENS = {"ci-token": "ci", "sec-token": "security"}


def _update(*pairs, **fields) -> StateUpdateBody:
    return StateUpdateBody(changes=[ChangeBody.from_bytes(obj, data) for obj, data in pairs], **fields)


# =============================================================================
# Error mapping
# =============================================================================


@pytest.mark.parametrize(
    "exc, status, reason",
    [
        (RequestInvalid("bad"), 400, "invalid-request"),
        (PolicyViolation("no"), 403, "policy-violation"),
        (DeAuthorized("pruned"), 409, "de-authorized"),
        (StaleStateDetected("old"), 503, "behind"),
        (RecoveryRequired("wait", kind="ahead"), 503, "ahead"),
        (RecoveryHalted("stuck"), 503, "recovery-halted"),
        (TamperDetected("bits"), 500, "tamper-detected"),
        (RuntimeError("boom"), 500, "internal-error"),
    ],
)
def test_error_response(exc, status, reason):

    code, body = error_response(exc)
    assert code == status
    assert body.reason == reason
    assert body.error == type(exc).__name__
    assert body.message == str(exc)
    assert body.schema_version == 1


def test_validation_errors_are_bad_requests():

    with pytest.raises(ValidationError) as exc_info:
        StateUpdateBody(changes=[], actor=ACTOR)
    code, body = error_response(exc_info.value)
    assert code == 400
    assert body.reason == "invalid-request"


# =============================================================================
# Actor and txid resolution
# =============================================================================


def test_actor_from_body_without_tokens(monitor):

    gateway = Gateway(monitor)
    assert gateway.resolve_actor(ACTOR, None) == ACTOR

    with pytest.raises(RequestInvalid):
        gateway.resolve_actor(None, None)


def test_actor_from_token(make_monitor):

    gateway = Gateway(make_monitor("store", actor_tokens=TOKENS))
    assert gateway.resolve_actor(None, "ci-token") == "ci"
    assert gateway.resolve_actor("security", "sec-token") == "security"

    with pytest.raises(PolicyViolation):
        gateway.resolve_actor("ci", None)
    with pytest.raises(PolicyViolation):
        gateway.resolve_actor("security", "ci-token")


def test_resolve_txid():

    derived = txid_from_key("deploy-7")
    assert Gateway.resolve_txid(None, None) is None
    assert Gateway.resolve_txid(None, "deploy-7") == derived
    assert Gateway.resolve_txid(derived, "deploy-7") == derived

    with pytest.raises(RequestInvalid):
        Gateway.resolve_txid("f" * 32, "deploy-7")


# =============================================================================
# Calls
# =============================================================================


def test_gateway_round_trip(monitor):

    gateway = Gateway(monitor)
    outcome = gateway.state_update(_update(("a", b"a1"), ("b", b"b1"), actor=ACTOR, snapshot={"tag": "r1"}))
    assert outcome.counter == 1
    assert outcome.pad_sizes == (4, 1, 2)
    assert outcome.root == monitor.checkpoint.root

    gateway.state_update(
        StateUpdateBody(changes=[{"object": "a", "content_digest": content_digest(b"b1")}], actor=ACTOR)
    )
    assert monitor.read_object("a") == b"b1"

    snapshot = gateway.take_snapshot(TakeSnapshotBody(tag="r2", members=["a", "b"], actor=ACTOR))
    assert snapshot.appended["registry"] == 1

    rollback = gateway.rollback(RollbackBody(mode="snapshot", tag="r1", actor=ACTOR))
    assert rollback.counter == 4
    assert monitor.read_object("a") == b"a1"

    prune = gateway.prune(
        PruneBody(mode="selective", targets=[{"object": "a", "version": 2}], reason="cve", actor=ACTOR)
    )
    assert prune.appended["catalog"] == 1

    checkpoint = gateway.checkpoint()
    assert checkpoint.verified
    assert checkpoint.counter == 5

    assert [s.tag for s in gateway.snapshots().snapshots] == ["r1", "r2"]
    lineage = gateway.lineage("a")
    assert lineage.counter == 5
    assert [event.version for event in lineage.events] == [1, 2, 4]
    assert gateway.lineage_text("a").count("\n") == 4

    eligibility = gateway.eligibility("a", 2)
    assert not eligibility.eligible
    assert eligibility.report.tombstone.reason.value == "cve"


def test_idempotency_key_replays(monitor):

    gateway = Gateway(monitor)
    first = gateway.state_update(_update(("a", b"a1"), actor=ACTOR), idempotency_key="build-1")
    again = gateway.state_update(_update(("a", b"a1"), actor=ACTOR), idempotency_key="build-1")

    assert first.txid == txid_from_key("build-1")
    assert again.replayed
    assert again.counter == first.counter == 1


def test_local_client_maps_failures(monitor):

    client = LocalClient(monitor)
    client.state_update(_update(("a", b"a1"), actor=ACTOR))

    with pytest.raises(ServiceError) as exc_info:
        client.rollback(RollbackBody(mode="snapshot", tag="missing", actor=ACTOR))
    assert exc_info.value.status == 409
    assert exc_info.value.error.reason == "unknown-snapshot"

    with pytest.raises(ServiceError) as exc_info:
        client.take_snapshot(TakeSnapshotBody(tag="t", members=["a"]))
    assert exc_info.value.status == 400

    # selector mismatch is rejected by request validation
    with pytest.raises(ServiceError) as exc_info:
        client.rollback(RollbackBody(mode="snapshot", actor=ACTOR))
    assert exc_info.value.status == 400
