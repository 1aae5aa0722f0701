import os

import pytest

from rollguard._content_store import ContentStore
from rollguard._exceptions import BlobNotFound, IntegrityViolation, ReclaimRejected
from rollguard.utils import content_digest


@pytest.fixture
def store(tmp_path):
    return ContentStore(str(tmp_path / "content"))


def test_put_is_digest_addressed(store):

    digest = store.put(b"release 1")
    assert digest == content_digest(b"release 1")
    assert store.path_for(digest).endswith(os.path.join(digest[:2], digest[2:4], digest))
    assert store.contains(digest)
    assert store.get_verified(digest) == b"release 1"

    # storing the same bytes twice is a no-op
    assert store.put(b"release 1") == digest
    assert store.total_bytes() == len(b"release 1")


def test_missing_blob(store):

    with pytest.raises(BlobNotFound):
        store.get_verified(content_digest(b"never stored"))


def test_invalid_digest_is_refused(store):

    with pytest.raises(ValueError):
        store.get_verified("not-a-digest")


def test_rehash_catches_substitution(store):

    digest = store.put(b"good build")
    with open(store.path_for(digest), "wb") as file:
        file.write(b"evil build")

    with pytest.raises(IntegrityViolation) as exc_info:
        store.get_verified(digest)
    assert digest in str(exc_info.value)


def test_put_rewrites_a_damaged_copy(store):

    digest = store.put(b"good build")
    with open(store.path_for(digest), "wb") as file:
        file.write(b"good bu")
    with pytest.raises(IntegrityViolation):
        store.get_verified(digest)

    assert store.put(b"good build") == digest
    assert store.get_verified(digest) == b"good build"
    assert store.total_bytes() == len(b"good build")


def test_reclaim_respects_live_references(store):

    digest = store.put(b"v1")

    with pytest.raises(ReclaimRejected):
        store.reclaim(digest, is_referenced=lambda d: d == digest)
    assert store.contains(digest)

    assert store.reclaim(digest, is_referenced=lambda d: False)
    assert not store.contains(digest)
    assert store.total_bytes() == 0

    # unknown digests are a no-op
    assert not store.reclaim(digest)
