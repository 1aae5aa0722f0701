"""
Independent oracles for the tests.

`naive_root`, `naive_inclusion` and `naive_consistency` recompute Merkle values
straight from a list of leaves with no caching. `LineageOracle` replays an
operation history on plain dictionaries, with no PADs and no hashing beyond the
content digest, and predicts the verified lineage and the leaf counts.
"""

import hashlib
from typing import Dict, List, Optional, Tuple

from rollguard.harness.histories import HistoryStep
from rollguard.models.leaves import Operation
from rollguard.models.requests import RollbackMode


def _h(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _k(n: int) -> int:
    k = 1
    while k * 2 < n:
        k *= 2
    return k


def naive_root(leaves: List[bytes]) -> bytes:
    if not leaves:
        return _h(b"")
    if len(leaves) == 1:
        return _h(b"\x00" + leaves[0])
    k = _k(len(leaves))
    return _h(b"\x01" + naive_root(leaves[:k]) + naive_root(leaves[k:]))


def naive_inclusion(index: int, leaves: List[bytes]) -> List[bytes]:
    if len(leaves) <= 1:
        return []
    k = _k(len(leaves))
    if index < k:
        return naive_inclusion(index, leaves[:k]) + [naive_root(leaves[k:])]
    return naive_inclusion(index - k, leaves[k:]) + [naive_root(leaves[:k])]


def _subproof(m: int, leaves: List[bytes], complete: bool) -> List[bytes]:
    n = len(leaves)
    if m == n:
        return [] if complete else [naive_root(leaves)]
    k = _k(n)
    if m <= k:
        return _subproof(m, leaves[:k], complete) + [naive_root(leaves[k:])]
    return _subproof(m - k, leaves[k:], False) + [naive_root(leaves[:k])]


def naive_consistency(m: int, leaves: List[bytes]) -> List[bytes]:
    if m == 0 or m == len(leaves):
        return []
    return _subproof(m, leaves, True)


# =============================================================================
# Lineage replay
# =============================================================================


class LineageOracle:
    """
    Plain replay of a committed history. `head_tracking` decides how many catalog
    leaves a head change costs ("leaf": a version entry plus a head pointer,
    "inline": the version entry alone).
    """

    def __init__(self, head_tracking: str = "leaf"):
        self.head_tracking = head_tracking
        self.counter = 0
        self.catalog = 0
        self.registry = 0
        self.log = 0
        self.versions: Dict[Tuple[str, int], str] = {}
        self.heads: Dict[str, Optional[int]] = {}
        self.tombstoned = set()
        self.snapshots: Dict[str, List[Tuple[str, int]]] = {}
        self.events: Dict[str, List[dict]] = {}
        self.first_seen: Dict[str, Dict[str, int]] = {}

    @property
    def pad_sizes(self) -> Tuple[int, int, int]:
        return self.catalog, self.registry, self.log

    def _new_version(self, step: HistoryStep, obj: str, digest: str, origin: Optional[int]):
        version = self.counter
        self.versions[(obj, version)] = digest
        if self.head_tracking == "leaf":
            leaf_index = self.catalog + 1
            self.catalog += 2
        else:
            leaf_index = self.catalog
            self.catalog += 1
        seen = self.first_seen.setdefault(obj, {})
        self.events.setdefault(obj, []).append(
            {
                "object": obj,
                "version": version,
                "leaf_index": leaf_index,
                "timestamp": self.counter * 1_000_000,
                "txid": step.txid,
                "description": step.justification,
                "origin": origin,
                "content_origin": seen.get(digest),
                "content_digest": digest,
            }
        )
        seen.setdefault(digest, version)
        self.heads[obj] = version

    def apply(self, step: HistoryStep) -> None:
        self.counter += 1
        self.log += 2

        if step.op == Operation.UPDATE:
            for obj, text in step.changes.items():
                digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
                self._new_version(step, obj, digest, self.heads.get(obj))
            if step.snapshot_tag:
                self.registry += 1
                self.snapshots[step.snapshot_tag] = [
                    (obj, self.counter) for obj in step.changes
                ]

        elif step.op == Operation.SNAPSHOT:
            self.registry += 1
            self.snapshots[step.tag] = [(obj, self.heads[obj]) for obj in step.members]

        elif step.op == Operation.ROLLBACK:
            if step.mode == RollbackMode.SNAPSHOT:
                targets = self.snapshots[step.tag]
            else:
                targets = [(t.object, t.version) for t in step.targets]
            for obj, version in targets:
                self._new_version(step, obj, self.versions[(obj, version)], version)

        else:
            before = dict(self.heads)
            for target in step.targets:
                self.tombstoned.add((target.object, target.version))
                self.catalog += 1
                if before.get(target.object) == target.version:
                    self.heads[target.object] = None
                    if self.head_tracking == "leaf":
                        self.catalog += 1

    def replay(self, steps: List[HistoryStep]) -> "LineageOracle":
        for step in steps:
            self.apply(step)
        return self

    def lineage(self, obj: str) -> List[dict]:
        return self.events.get(obj, [])

    def live_heads(self) -> Dict[str, Optional[int]]:
        return dict(self.heads)
