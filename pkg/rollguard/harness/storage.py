"""
Byte-level control over untrusted storage, as an attacker holding the disk has it.
Nothing here touches the trusted directory (counter and sealing key).
"""

import os
import shutil
from typing import Dict, Iterable, Literal, Optional

from pydantic import BaseModel, ConfigDict

from rollguard.constants import PAD_DIR, PAD_HEADER_SIZE, PAD_LENGTH_PREFIX
from rollguard.logger_conf import get_logger

logger = get_logger(__name__)

Mutation = Literal["flip", "truncate", "append"]


class StorageSnapshot(BaseModel):
    """Every untrusted file, keyed by path relative to the untrusted directory."""

    model_config = ConfigDict(frozen=True)

    files: Dict[str, bytes]

    def total_bytes(self) -> int:
        return sum(len(data) for data in self.files.values())


def _walk(root: str) -> Iterable[str]:
    for directory, _, names in os.walk(root):
        for name in names:
            path = os.path.join(directory, name)
            yield os.path.relpath(path, root)


def snapshot_untrusted(untrusted_dir: str) -> StorageSnapshot:
    files = {}
    for relpath in sorted(_walk(untrusted_dir)):
        with open(os.path.join(untrusted_dir, relpath), "rb") as file:
            files[relpath] = file.read()
    return StorageSnapshot(files=files)


def _selected(relpath: str, only: Optional[Iterable[str]]) -> bool:
    if only is None:
        return True
    return any(
        relpath == prefix or relpath.startswith(prefix.rstrip("/") + os.sep)
        for prefix in only
    )


def restore_untrusted(
    untrusted_dir: str, snapshot: StorageSnapshot, only: Optional[Iterable[str]] = None
) -> None:
    """
    Make untrusted storage byte-identical to `snapshot`. `only` restricts the
    restore to the given relative paths or directory prefixes (e.g. "content").
    """
    only = list(only) if only is not None else None
    for relpath in list(_walk(untrusted_dir)):
        if _selected(relpath, only) and relpath not in snapshot.files:
            os.remove(os.path.join(untrusted_dir, relpath))

    for relpath, data in snapshot.files.items():
        if not _selected(relpath, only):
            continue
        path = os.path.join(untrusted_dir, relpath)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as file:
            file.write(data)


def clone_directory(source: str, destination: str) -> None:
    if os.path.exists(destination):
        shutil.rmtree(destination)
    shutil.copytree(source, destination)


def pad_path(untrusted_dir: str, pad: str) -> str:
    return os.path.join(untrusted_dir, PAD_DIR, f"{pad}.pad")


def leaf_offsets(path: str) -> list:
    """(offset, length) of each complete record in a PAD leaf file."""
    with open(path, "rb") as file:
        data = file.read()
    offsets = []
    position = PAD_HEADER_SIZE
    while position + PAD_LENGTH_PREFIX <= len(data):
        length = int.from_bytes(data[position : position + PAD_LENGTH_PREFIX], "little")
        if position + PAD_LENGTH_PREFIX + length > len(data):
            break
        offsets.append((position, length))
        position += PAD_LENGTH_PREFIX + length
    return offsets


def tamper_leaf(
    untrusted_dir: str,
    pad: str,
    index: int,
    mutation: Mutation = "flip",
    byte: int = 0,
) -> None:
    """
    flip: invert one byte inside leaf `index` (offset `byte` into the encoding).
    truncate: cut the file at the start of leaf `index`.
    append: write a copy of leaf `index` after the last leaf.
    """
    path = pad_path(untrusted_dir, pad)
    offset, length = leaf_offsets(path)[index]
    with open(path, "r+b") as file:
        if mutation == "flip":
            position = offset + PAD_LENGTH_PREFIX + (byte % length)
            file.seek(position)
            original = file.read(1)
            file.seek(position)
            file.write(bytes([original[0] ^ 0xFF]))
        elif mutation == "truncate":
            file.truncate(offset)
        elif mutation == "append":
            file.seek(offset)
            record = file.read(PAD_LENGTH_PREFIX + length)
            file.seek(0, os.SEEK_END)
            file.write(record)
        else:
            raise ValueError(f"Unknown mutation '{mutation}'.")
    logger.info(
        "Applied %s to leaf %s of '%s'.", mutation, index, pad, extra={"pad": pad, "index": index}
    )
