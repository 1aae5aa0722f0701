import os

import pytest

from rollguard.utils import (
    atomic_write,
    canonical_json,
    content_digest,
    directory_size,
    hex_to_digest,
    new_txid,
    txid_from_key,
)


def test_canonical_json():

    assert canonical_json({"b": 1, "a": [1, 2], "c": None}) == b'{"a":[1,2],"b":1,"c":null}'
    assert canonical_json({"name": "naïve"}) == b'{"name":"na\\u00efve"}'


def test_content_digest():

    assert content_digest(b"") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_hex_to_digest():

    assert hex_to_digest("00" * 32) == bytes(32)

    with pytest.raises(ValueError) as exc_info:
        hex_to_digest("00" * 16)
    assert str(exc_info.value) == "Expected a 32-byte digest, got 16 bytes."


def test_txids():

    txid = new_txid()
    assert len(txid) == 32
    assert txid != new_txid()

    # idempotency keys map to stable txids
    assert txid_from_key("deploy-42") == txid_from_key("deploy-42")
    assert txid_from_key("deploy-42") != txid_from_key("deploy-43")
    assert len(txid_from_key("deploy-42")) == 32


def test_atomic_write(tmp_path):

    path = str(tmp_path / "nested" / "file.bin")
    atomic_write(path, b"first")
    atomic_write(path, b"second")

    with open(path, "rb") as file:
        assert file.read() == b"second"
    assert not os.path.exists(f"{path}.tmp")


def test_atomic_write_interrupted_before_rename(tmp_path):

    path = str(tmp_path / "file.bin")
    atomic_write(path, b"old")

    def interrupt():
        raise RuntimeError("power loss")

    with pytest.raises(RuntimeError):
        atomic_write(path, b"new", before_rename=interrupt)

    with open(path, "rb") as file:
        assert file.read() == b"old"


def test_directory_size(tmp_path):

    assert directory_size(str(tmp_path)) == 0
    (tmp_path / "a").write_bytes(b"12345")
    os.makedirs(tmp_path / "sub")
    (tmp_path / "sub" / "b").write_bytes(b"123")
    assert directory_size(str(tmp_path)) == 8
