"""
Random, always-valid operation histories for the adversary harness. The generator
keeps its own plain model of heads, tombstones and snapshot tags so every step it
emits is expected to commit on a fresh monitor.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rollguard._monitor import ReferenceMonitor
from rollguard.models.base import TxId
from rollguard.models.leaves import Operation, PruneReason
from rollguard.models.requests import (
    PruneRequest,
    RollbackMode,
    RollbackRequest,
    Target,
    TxOutcome,
    UpdateRequest,
)

OP_WEIGHTS = {
    Operation.UPDATE: 0.45,
    Operation.SNAPSHOT: 0.15,
    Operation.ROLLBACK: 0.2,
    Operation.PRUNE: 0.2,
}


class HistoryStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Operation
    txid: TxId
    changes: Dict[str, str] = Field(default_factory=dict)
    snapshot_tag: Optional[str] = None
    tag: Optional[str] = None
    members: List[str] = Field(default_factory=list)
    mode: Optional[RollbackMode] = None
    targets: List[Target] = Field(default_factory=list)
    reason: PruneReason = PruneReason.OTHER
    justification: str = ""


def apply_step(
    monitor: ReferenceMonitor, step: HistoryStep, actor: str = "harness"
) -> TxOutcome:
    if step.op == Operation.UPDATE:
        return monitor.state_update(
            UpdateRequest(
                changes=[
                    {"object": obj, "content": text.encode("utf-8")}
                    for obj, text in step.changes.items()
                ],
                snapshot={"tag": step.snapshot_tag} if step.snapshot_tag else None,
                actor=actor,
                justification=step.justification,
                txid=step.txid,
            )
        )
    if step.op == Operation.SNAPSHOT:
        return monitor.take_snapshot(
            step.tag, step.members, actor, step.justification, txid=step.txid
        )

    selector = (
        {"tag": step.tag} if step.mode == RollbackMode.SNAPSHOT else {"targets": step.targets}
    )
    if step.op == Operation.ROLLBACK:
        return monitor.rollback(
            RollbackRequest(
                mode=step.mode,
                actor=actor,
                justification=step.justification,
                txid=step.txid,
                **selector,
            )
        )
    return monitor.prune(
        PruneRequest(
            mode=step.mode,
            reason=step.reason,
            actor=actor,
            justification=step.justification,
            txid=step.txid,
            **selector,
        )
    )


class _PlainModel:
    def __init__(self, objects: List[str]):
        self.objects = objects
        self.counter = 0
        self.versions: Dict[str, List[int]] = {obj: [] for obj in objects}
        self.heads: Dict[str, Optional[int]] = {obj: None for obj in objects}
        self.tombstoned: set = set()
        self.snapshots: Dict[str, List[Tuple[str, int]]] = {}

    def live_versions(self) -> List[Tuple[str, int]]:
        return [
            (obj, version)
            for obj in self.objects
            for version in self.versions[obj]
            if (obj, version) not in self.tombstoned
        ]

    def live_heads(self) -> List[str]:
        return [obj for obj in self.objects if self.heads[obj] is not None]

    def eligible_tags(self) -> List[str]:
        return [
            tag
            for tag, members in self.snapshots.items()
            if not any(member in self.tombstoned for member in members)
        ]

    def commit(self, heads: Dict[str, Optional[int]]) -> int:
        self.counter += 1
        for obj, version in heads.items():
            if version is not None and version == self.counter:
                self.versions[obj].append(version)
            self.heads[obj] = version
        return self.counter


def _pick(rng: np.random.Generator, items: List, low: int, high: int) -> List:
    count = int(rng.integers(low, min(high, len(items)) + 1))
    chosen = rng.choice(len(items), size=count, replace=False)
    return [items[i] for i in sorted(chosen)]


def _distinct_objects(pairs: List[Tuple[str, int]]) -> List[Tuple[str, int]]:
    seen = set()
    distinct = []
    for obj, version in pairs:
        if obj not in seen:
            seen.add(obj)
            distinct.append((obj, version))
    return distinct


def generate_history(
    seed: int, n_ops: int = 50, n_objects: int = 10, snapshot_rate: float = 0.1
) -> List[HistoryStep]:
    rng = np.random.default_rng(seed)
    objects = [f"obj-{i:02d}" for i in range(n_objects)]
    model = _PlainModel(objects)
    ops = list(OP_WEIGHTS)
    weights = np.array(list(OP_WEIGHTS.values()))

    steps = []
    for _ in range(n_ops):
        op = Operation.UPDATE if not steps else ops[rng.choice(len(ops), p=weights)]
        txid = rng.bytes(16).hex()
        next_counter = model.counter + 1

        if op == Operation.SNAPSHOT and model.live_heads():
            members = _pick(rng, model.live_heads(), 1, 4)
            tag = f"snap-{next_counter}"
            model.snapshots[tag] = [(obj, model.heads[obj]) for obj in members]
            model.commit({})
            steps.append(HistoryStep(op=op, txid=txid, tag=tag, members=members))
            continue

        if op == Operation.ROLLBACK:
            tags = model.eligible_tags()
            if tags and rng.random() < 0.3:
                tag = tags[int(rng.integers(len(tags)))]
                model.commit({obj: next_counter for obj, _ in model.snapshots[tag]})
                steps.append(
                    HistoryStep(op=op, txid=txid, mode=RollbackMode.SNAPSHOT, tag=tag)
                )
                continue
            live = model.live_versions()
            if live:
                chosen = _distinct_objects(_pick(rng, live, 1, 2))
                model.commit({obj: next_counter for obj, _ in chosen})
                steps.append(
                    HistoryStep(
                        op=op,
                        txid=txid,
                        mode=RollbackMode.SELECTIVE,
                        targets=[Target(object=o, version=v) for o, v in chosen],
                        justification="restore known-good state",
                    )
                )
                continue

        if op == Operation.PRUNE and model.live_versions():
            chosen = _pick(rng, model.live_versions(), 1, 2)
            cleared = {obj: None for obj, version in chosen if model.heads[obj] == version}
            model.tombstoned.update(chosen)
            model.commit(cleared)
            steps.append(
                HistoryStep(
                    op=op,
                    txid=txid,
                    mode=RollbackMode.SELECTIVE,
                    targets=[Target(object=o, version=v) for o, v in chosen],
                    reason=PruneReason.CVE,
                    justification="vulnerable build",
                )
            )
            continue

        changed = _pick(rng, objects, 1, 3)
        changes = {obj: f"{obj}:{int(rng.integers(0, 4))}" for obj in changed}
        snapshot_tag = f"rel-{next_counter}" if rng.random() < snapshot_rate else None
        if snapshot_tag:
            model.snapshots[snapshot_tag] = [(obj, next_counter) for obj in changed]
        model.commit({obj: next_counter for obj in changed})
        steps.append(
            HistoryStep(
                op=Operation.UPDATE,
                txid=txid,
                changes=changes,
                snapshot_tag=snapshot_tag,
                justification=f"release {next_counter}",
            )
        )

    return steps


def run_history(
    monitor: ReferenceMonitor, steps: List[HistoryStep], actor: str = "harness"
) -> List[TxOutcome]:
    return [apply_step(monitor, step, actor) for step in steps]
