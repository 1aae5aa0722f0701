import hashlib
import json
import os
import time
import uuid
from typing import Any, Callable, Optional

from rollguard.constants import DIGEST_SIZE, IDEMPOTENCY_NAMESPACE


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hex_to_digest(value: str) -> bytes:
    raw = bytes.fromhex(value)
    if len(raw) != DIGEST_SIZE:
        raise ValueError(f"Expected a {DIGEST_SIZE}-byte digest, got {len(raw)} bytes.")
    return raw


def load_json(filename):
    with open(filename, "r", encoding="utf-8") as file:
        data = json.load(file)
    return data


def canonical_json(data: Any) -> bytes:
    """Deterministic JSON encoding: sorted keys, no whitespace, ASCII only."""
    return json.dumps(
        data, sort_keys=True, separators=(",", ":"), ensure_ascii=True
    ).encode("ascii")


def fsync_dir(path: str) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def atomic_write(
    path: str,
    data: bytes,
    before_rename: Optional[Callable[[], None]] = None,
    mode: int = 0o644,
) -> None:
    """
    Write `data` to `path` through a synced temp file and an atomic rename.

    `before_rename` runs once the temp file is durable but not yet visible under
    its final name; crash hooks attach there.
    """
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    fd = os.open(tmp_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, mode)
    try:
        os.write(fd, data)
        os.fsync(fd)
    finally:
        os.close(fd)

    if before_rename is not None:
        before_rename()

    os.replace(tmp_path, path)
    fsync_dir(directory)


def now_micros() -> int:
    return time.time_ns() // 1_000


def new_txid() -> str:
    return uuid.uuid4().hex


def txid_from_key(idempotency_key: str) -> str:
    """Map a client idempotency key onto a stable transaction id."""
    return uuid.uuid5(uuid.UUID(IDEMPOTENCY_NAMESPACE), idempotency_key).hex


def directory_size(path: str) -> int:
    total = 0
    for root, _, files in os.walk(path):
        for name in files:
            try:
                total += os.path.getsize(os.path.join(root, name))
            except OSError:
                continue
    return total
