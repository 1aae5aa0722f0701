"""
Simulated hardware root of trust.

Provides a strictly monotonic counter and HMAC sealing of authoritative roots.
Both the counter and the sealing key live in a trusted-private directory that the
untrusted-storage attacker of the harness never touches. Every handle on the same
directory shares one counter: reads go to the sealed record on disk, and steps are
serialized by an exclusive lock on a sibling lock file.
"""

import fcntl
import os
import secrets
import threading
from contextlib import contextmanager
from typing import Iterator, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, hmac

from rollguard._crash import CrashPoints
from rollguard._exceptions import HardwareRootError
from rollguard.constants import (
    COUNTER_FILE,
    COUNTER_LOCK_FILE,
    COUNTER_TAG,
    DIGEST_SIZE,
    HOOK_COUNTER_STAGED,
    KEY_FILE,
    KEY_SIZE,
    SEAL_TAG,
)
from rollguard.logger_conf import get_logger
from rollguard.models.checkpoint import Seal
from rollguard.utils import atomic_write, hex_to_digest

logger = get_logger(__name__)

COUNTER_RECORD_SIZE = 8 + DIGEST_SIZE


def seal_message(root: bytes, counter: int) -> bytes:
    """Canonical sealed encoding: "SEAL" || counter (8 bytes BE) || root (32 bytes)."""
    return SEAL_TAG + counter.to_bytes(8, "big") + root


class HardwareRoot:

    def __init__(self, trusted_dir: str, crash_points: Optional[CrashPoints] = None):
        self.trusted_dir = trusted_dir
        self._crash = crash_points or CrashPoints()
        self._lock = threading.RLock()
        self._holders = 0
        self._lock_fd: Optional[int] = None

        try:
            os.makedirs(trusted_dir, exist_ok=True)
            self.__key = self._load_or_provision_key()
            with self.exclusive():
                self._provision_counter()
            self._value = self._read_counter()
        except OSError as e:
            raise HardwareRootError(
                f"Trusted storage at '{trusted_dir}' is unavailable: {e}"
            ) from e

    # -------------------------------------------------------------------------
    # Cross-handle lock
    # -------------------------------------------------------------------------

    @contextmanager
    def exclusive(self) -> Iterator[None]:
        """
        Hold the counter against every other handle, in this process or another.
        Reentrant for the thread that holds it.
        """
        with self._lock:
            if self._holders == 0:
                self._acquire_file_lock()
            self._holders += 1
            try:
                yield
            finally:
                self._holders -= 1
                if self._holders == 0:
                    self._release_file_lock()

    def _acquire_file_lock(self) -> None:
        path = os.path.join(self.trusted_dir, COUNTER_LOCK_FILE)
        try:
            fd = os.open(path, os.O_RDWR | os.O_CREAT, 0o600)
        except OSError as e:
            raise HardwareRootError(f"Cannot open the counter lock: {e}") from e
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
        except OSError as e:
            os.close(fd)
            raise HardwareRootError(f"Cannot lock the counter: {e}") from e
        self._lock_fd = fd

    def _release_file_lock(self) -> None:
        fd, self._lock_fd = self._lock_fd, None
        if fd is None:
            return
        try:
            fcntl.flock(fd, fcntl.LOCK_UN)
        finally:
            os.close(fd)

    # -------------------------------------------------------------------------
    # Key and counter persistence
    # -------------------------------------------------------------------------

    def _load_or_provision_key(self) -> bytes:
        path = os.path.join(self.trusted_dir, KEY_FILE)
        if os.path.exists(path):
            with open(path, "rb") as file:
                key = file.read()
            if len(key) != KEY_SIZE:
                raise HardwareRootError("Sealing key has an invalid length.")
            return key

        key = secrets.token_bytes(KEY_SIZE)
        atomic_write(path, key, mode=0o600)
        logger.info("Provisioned a new sealing key.")
        return key

    def _mac(self, message: bytes) -> bytes:
        h = hmac.HMAC(self.__key, hashes.SHA256())
        h.update(message)
        return h.finalize()

    def _mac_matches(self, message: bytes, tag: bytes) -> bool:
        h = hmac.HMAC(self.__key, hashes.SHA256())
        h.update(message)
        try:
            h.verify(tag)
        except InvalidSignature:
            return False
        return True

    def _encode_counter(self, value: int) -> bytes:
        raw = value.to_bytes(8, "big")
        return raw + self._mac(COUNTER_TAG + raw)

    def _provision_counter(self) -> None:
        path = os.path.join(self.trusted_dir, COUNTER_FILE)
        if not os.path.exists(path):
            atomic_write(path, self._encode_counter(0), mode=0o600)
            logger.info("Provisioned the monotonic counter at 0.")

    def _read_counter(self) -> int:
        path = os.path.join(self.trusted_dir, COUNTER_FILE)
        try:
            with open(path, "rb") as file:
                record = file.read()
        except FileNotFoundError as e:
            raise HardwareRootError("Counter record is missing.") from e
        if len(record) != COUNTER_RECORD_SIZE:
            raise HardwareRootError("Counter record has an invalid length.")
        raw, tag = record[:8], record[8:]
        if not self._mac_matches(COUNTER_TAG + raw, tag):
            raise HardwareRootError("Counter record failed authentication.")
        return int.from_bytes(raw, "big")

    def _advance(self, step: int) -> int:
        path = os.path.join(self.trusted_dir, COUNTER_FILE)
        with self.exclusive():
            try:
                new_value = self._read_counter() + step
                atomic_write(
                    path,
                    self._encode_counter(new_value),
                    before_rename=lambda: self._crash.hook(HOOK_COUNTER_STAGED),
                    mode=0o600,
                )
            except OSError as e:
                raise HardwareRootError(f"Counter increment was not durable: {e}") from e
            self._value = new_value
            return new_value

    # -------------------------------------------------------------------------
    # Counter API
    # -------------------------------------------------------------------------

    def counter_read(self) -> int:
        """The durable value, read and authenticated on every call."""
        try:
            self._value = self._read_counter()
        except OSError as e:
            raise HardwareRootError(f"Counter record is unreadable: {e}") from e
        return self._value

    def counter_increment(self) -> int:
        return self._advance(1)

    def counter_double_increment(self) -> int:
        """Advance by two. Only recovery calls this; it skips the staged c+1 value."""
        value = self._advance(2)
        logger.warning(
            "Counter double-incremented to %s.", value, extra={"counter": value}
        )
        return value

    # -------------------------------------------------------------------------
    # Sealing API
    # -------------------------------------------------------------------------

    def seal(self, root: str, counter: int) -> Seal:
        tag = self._mac(seal_message(hex_to_digest(root), counter))
        return Seal(tag=tag.hex(), counter=counter, root=root)

    def verify_seal(self, seal: Seal, root: str, counter: int) -> bool:
        if seal.counter != counter or seal.root != root:
            return False
        try:
            message = seal_message(hex_to_digest(root), counter)
            tag = bytes.fromhex(seal.tag)
        except ValueError:
            return False
        return self._mac_matches(message, tag)
