import os
from typing import Callable, Optional

from rollguard._exceptions import (
    BlobNotFound,
    IntegrityViolation,
    ReclaimRejected,
    StorageError,
)
from rollguard.logger_conf import get_logger
from rollguard.models.utils import validate_digest
from rollguard.utils import atomic_write, content_digest, directory_size, fsync_dir

logger = get_logger(__name__)


class ContentStore:
    """
    Digest-addressed blobs on untrusted storage, laid out as
    `<root>/<d[0:2]>/<d[2:4]>/<digest>`. Reads always rehash.
    """

    def __init__(self, root_dir: str):
        self.root_dir = root_dir
        os.makedirs(root_dir, exist_ok=True)

    def path_for(self, digest: str) -> str:
        validate_digest("digest", digest)
        return os.path.join(self.root_dir, digest[:2], digest[2:4], digest)

    def contains(self, digest: str) -> bool:
        return os.path.exists(self.path_for(digest))

    def put(self, data: bytes) -> str:
        digest = content_digest(data)
        path = self.path_for(digest)
        if self._holds(path, digest):
            return digest
        try:
            atomic_write(path, data)
        except OSError as e:
            raise StorageError(f"Could not store blob {digest}: {e}") from e
        return digest

    @staticmethod
    def _holds(path: str, digest: str) -> bool:
        """True if `path` exists and rehashes to `digest`; a damaged copy is logged for rewrite."""
        try:
            with open(path, "rb") as file:
                actual = content_digest(file.read())
        except FileNotFoundError:
            return False
        except OSError as e:
            raise StorageError(f"Could not read blob {digest}: {e}") from e
        if actual != digest:
            logger.warning(
                "Rewriting blob %s, stored copy rehashes to %s.",
                digest,
                actual,
                extra={"kind": "content"},
            )
            return False
        return True

    def get_verified(self, digest: str) -> bytes:
        path = self.path_for(digest)
        try:
            with open(path, "rb") as file:
                data = file.read()
        except FileNotFoundError as e:
            raise BlobNotFound(f"Blob {digest} is not in the content store.") from e
        except OSError as e:
            raise StorageError(f"Could not read blob {digest}: {e}") from e

        actual = content_digest(data)
        if actual != digest:
            logger.error(
                "Blob %s rehashes to %s.", digest, actual, extra={"kind": "content"}
            )
            raise IntegrityViolation(
                f"Blob {digest} failed verification (rehash gives {actual})."
            )
        return data

    def reclaim(self, digest: str, is_referenced: Optional[Callable[[str], bool]] = None) -> bool:
        """
        Delete a blob. `is_referenced` is the caller's reference check under the
        current root; a live reference rejects the reclaim. Unknown digests are a
        no-op. Returns whether a file was removed.
        """
        if is_referenced is not None and is_referenced(digest):
            raise ReclaimRejected(
                f"Blob {digest} is still referenced by a live version."
            )
        path = self.path_for(digest)
        try:
            os.remove(path)
        except FileNotFoundError:
            return False
        except OSError as e:
            raise StorageError(f"Could not reclaim blob {digest}: {e}") from e
        fsync_dir(os.path.dirname(path))
        logger.info("Reclaimed blob %s.", digest)
        return True

    def total_bytes(self) -> int:
        return directory_size(self.root_dir)
