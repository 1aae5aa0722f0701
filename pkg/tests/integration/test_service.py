import pytest
from fastapi.testclient import TestClient

from rollguard.service import create_app
from rollguard.service.schemas import ChangeBody

from ..conftest import ACTOR, golden_path


def txid(n: int) -> str:
    return f"{n:032x}"


def _change(obj: str, text: str) -> dict:
    return ChangeBody.from_bytes(obj, text.encode()).model_dump(exclude_none=True)


@pytest.fixture
def client(monitor):
    return TestClient(create_app(monitor))


def _post(client, path: str, body: dict, status: int = 200, **headers) -> dict:
    response = client.post(path, json=body, headers=headers)
    assert response.status_code == status, response.text
    return response.json()


def _release_history(client):
    first = _post(
        client,
        "/v1/state_update",
        {
            "changes": [_change("app", "build-1")],
            "snapshot": {"tag": "r1"},
            "actor": ACTOR,
            "justification": "release 1",
            "txid": txid(1),
        },
    )
    assert first["counter"] == 1
    assert first["appended"] == {"catalog": 2, "registry": 1, "log": 2}

    second = _post(
        client,
        "/v1/state_update",
        {"changes": [_change("app", "build-2")], "actor": ACTOR, "justification": "release 2", "txid": txid(2)},
    )
    assert second["counter"] == 2

    restored = _post(
        client,
        "/v1/rollback",
        {
            "mode": "snapshot",
            "tag": "r1",
            "actor": ACTOR,
            "justification": "restore known-good state",
            "txid": txid(3),
        },
    )
    assert restored["counter"] == 3

    pruned = _post(
        client,
        "/v1/prune",
        {
            "mode": "selective",
            "targets": [{"object": "app", "version": 2}],
            "reason": "cve",
            "reason_detail": "CVE-2024-0001",
            "actor": ACTOR,
            "justification": "vulnerable build",
            "txid": txid(4),
        },
    )
    assert pruned["counter"] == 4

    refused = _post(
        client,
        "/v1/rollback",
        {"mode": "selective", "targets": [{"object": "app", "version": 2}], "actor": ACTOR, "txid": txid(5)},
        status=409,
    )
    assert refused["reason"] == "de-authorized"

    latest = _post(
        client,
        "/v1/state_update",
        {"changes": [_change("app", "build-3")], "actor": ACTOR, "justification": "release 5", "txid": txid(6)},
    )
    assert latest["counter"] == 5


def test_release_history_matches_golden_lineage(client):

    _release_history(client)

    response = client.get("/v1/lineage/app", params={"format": "text"})
    assert response.status_code == 200
    with open(golden_path("lineage_golden.txt")) as file:
        assert response.text == file.read()

    events = client.get("/v1/lineage/app").json()["events"]
    assert [event["version"] for event in events] == [1, 2, 3, 5]
    assert [event["origin"] for event in events] == [None, 1, 1, 3]


def test_audit_queries_after_release_history(client):

    _release_history(client)

    checkpoint = client.get("/v1/checkpoint").json()
    assert checkpoint["verified"] is True
    assert checkpoint["counter"] == 5

    listings = client.get("/v1/snapshots").json()["snapshots"]
    assert [listing["tag"] for listing in listings] == ["r1"]
    assert listings[0]["members"] == [{"object": "app", "version": 1}]
    assert listings[0]["pruned_members"] == []

    pruned = client.get("/v1/eligibility", params={"object": "app", "version": 2}).json()
    assert pruned["eligible"] is False
    assert pruned["report"]["tombstoned"] is True
    assert pruned["report"]["tombstone"]["reason"] == "cve"

    restored = client.get("/v1/eligibility", params={"object": "app", "version": 1, "tag": "r1"}).json()
    assert restored["eligible"] is True
    assert restored["report"]["catalog_proof"] is not None


def test_idempotency_key_replays_the_first_outcome(client):

    body = {"changes": [_change("app", "build-1")], "actor": ACTOR}
    first = _post(client, "/v1/state_update", body, **{"Idempotency-Key": "deploy-42"})
    again = _post(client, "/v1/state_update", body, **{"Idempotency-Key": "deploy-42"})

    assert again["txid"] == first["txid"]
    assert again["counter"] == first["counter"] == 1
    assert again["replayed"] is True
    assert client.get("/v1/checkpoint").json()["counter"] == 1


@pytest.mark.parametrize(
    "path, body",
    [
        ("/v1/state_update", {"changes": [], "actor": ACTOR}),
        ("/v1/state_update", {"changes": [_change("app", "x")], "actor": ACTOR, "surprise": 1}),
        ("/v1/rollback", {"mode": "sideways", "actor": ACTOR}),
        ("/v1/take_snapshot", {"tag": "r1", "members": [], "actor": ACTOR}),
    ],
)
def test_malformed_bodies_are_bad_requests(client, path, body):

    error = _post(client, path, body, status=400)
    assert error["reason"] == "invalid-request"
    assert client.get("/v1/checkpoint").json()["counter"] == 0


def test_unknown_snapshot_is_a_conflict(client):

    error = _post(client, "/v1/rollback", {"mode": "snapshot", "tag": "nope", "actor": ACTOR}, status=409)
    assert error["reason"] == "unknown-snapshot"
    assert client.get("/v1/eligibility", params={"object": "app"}).status_code == 400
