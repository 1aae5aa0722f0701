"""
Attack scenarios against a monitor on a private data directory. Each scenario runs
a generated setup history, applies one attack and asserts the expected outcome;
the runner reports a verdict instead of raising so a full matrix can be collected.
"""

import os
import shutil
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from rollguard._crash import CrashPoints
from rollguard._exceptions import (
    DeAuthorized,
    RecoveryHalted,
    StaleStateDetected,
    TamperDetected,
)
from rollguard._hardware import HardwareRoot
from rollguard._monitor import ReferenceMonitor
from rollguard.config import HeadTracking, MonitorConfig
from rollguard.constants import (
    ALL_HOOKS,
    CATALOG,
    CHECKPOINT_DIR,
    HOOK_CATALOG_LEAF_APPENDED,
    HOOK_CHECKPOINT_PERSISTED,
    HOOK_COUNTER_ADVANCED,
    HOOK_COUNTER_STAGED,
    HOOK_PUBLISHED,
    HOOK_RECOVERY_SEALED,
    PAD_DIR,
    PAD_NAMES,
    PROTOCOL_HOOKS,
    REGISTRY,
    SCENARIO_FILE,
)
from rollguard.harness.child import ChildJob, run_in_child
from rollguard.harness.histories import HistoryStep, apply_step, generate_history
from rollguard.harness.storage import (
    Mutation,
    StorageSnapshot,
    clone_directory,
    restore_untrusted,
    snapshot_untrusted,
    tamper_leaf,
)
from rollguard.logger_conf import get_logger
from rollguard.models.base import Digest
from rollguard.models.checkpoint import AuthoritativeCheckpoint, Seal
from rollguard.models.leaves import Operation, PruneReason
from rollguard.models.requests import (
    PruneRequest,
    RollbackMode,
    RollbackRequest,
    Target,
)
from rollguard.utils import load_json

logger = get_logger(__name__)

CRASH_OBJECT = "crash-obj"


class AttackKind(str, Enum):
    REPLAY_STORAGE = "replay_storage"
    SWAP_STALE_LISTING = "swap_stale_listing"
    RESURRECT_PRUNED = "resurrect_pruned"
    TAMPER_LEAF_FILE = "tamper_leaf_file"
    FORGE_SEAL = "forge_seal"
    CRASH_STAGE = "crash_stage"


class Expected(str, Enum):
    DETECTED = "detected"
    BLOCKED = "blocked"
    RECOVERED_CONSISTENT = "recovered_consistent"


class HistoryPlan(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    n_ops: int = Field(default=10, ge=1, le=50)
    n_objects: int = Field(default=3, ge=1, le=10)


class AttackScenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    setup: HistoryPlan = Field(default_factory=HistoryPlan)
    attack: AttackKind
    expected: Expected
    # replay / swap: storage as it was after this many setup operations
    prefix: int = Field(default=0, ge=0)
    # tamper
    pad: Optional[str] = None
    index: int = Field(default=0, ge=0)
    mutation: Mutation = "flip"
    byte: int = Field(default=0, ge=0)
    # crash staging
    hook: Optional[str] = None
    op: Operation = Operation.UPDATE
    repetitions: int = Field(default=3, ge=1)
    # forged seals tried against the hardware root
    forgeries: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def check_attack_parameters(self):
        if self.attack in (AttackKind.REPLAY_STORAGE, AttackKind.SWAP_STALE_LISTING):
            if self.prefix >= self.setup.n_ops:
                raise ValueError("'prefix' must name storage older than the final state.")
        if self.attack == AttackKind.TAMPER_LEAF_FILE and self.pad not in PAD_NAMES:
            raise ValueError(f"'pad' must be one of {PAD_NAMES}.")
        if self.attack == AttackKind.CRASH_STAGE:
            if self.hook not in ALL_HOOKS or self.hook == HOOK_RECOVERY_SEALED:
                raise ValueError(f"'{self.hook}' is not a protocol crash hook.")
            if self.hook == HOOK_CATALOG_LEAF_APPENDED and self.op == Operation.SNAPSHOT:
                raise ValueError("Snapshots append no catalog leaves.")
        return self


class Verdict(BaseModel):
    name: str
    attack: AttackKind
    expected: Expected
    observed: Optional[Expected] = None
    passed: bool
    detail: str = ""
    counter_before: int
    counter_after: int


class StateFingerprint(BaseModel):
    """Committed state compared bit-for-bit after crash recovery."""

    model_config = ConfigDict(frozen=True)

    root: Digest
    pad_sizes: Tuple[int, int, int]
    heads: Dict[str, Optional[int]]

    @classmethod
    def of(cls, monitor: ReferenceMonitor) -> "StateFingerprint":
        at = monitor.checkpoint
        heads = {}
        for obj in monitor.state.index.objects(at.catalog_size):
            head = monitor.state.current_head(obj, at)
            heads[obj] = head[0] if head is not None else None
        return cls(root=at.root, pad_sizes=tuple(at.pad_sizes), heads=heads)


# Which legal state a crash at each hook must recover to, and the counter jump.
# "before": the operation never happened. "after": it committed.
CRASH_OUTCOMES: Dict[str, Tuple[str, int]] = {
    **{hook: ("before", 2) for hook in PROTOCOL_HOOKS},
    HOOK_CATALOG_LEAF_APPENDED: ("before", 2),
    HOOK_CHECKPOINT_PERSISTED: ("after", 2),
    HOOK_COUNTER_STAGED: ("after", 2),
    HOOK_COUNTER_ADVANCED: ("after", 1),
    HOOK_PUBLISHED: ("after", 1),
}

Outcome = Tuple[Optional[Expected], str]


def load_scenarios(path: str = SCENARIO_FILE) -> List[AttackScenario]:
    data = load_json(path)
    return [AttackScenario(**item) for item in data["scenarios"]]


def crash_matrix(
    hooks: Iterable[str] = PROTOCOL_HOOKS,
    ops: Iterable[Operation] = tuple(Operation),
    repetitions: int = 3,
    seed: int = 0,
) -> List[AttackScenario]:
    return [
        AttackScenario(
            name=f"crash-{op.value}-{hook}",
            setup=HistoryPlan(seed=seed, n_ops=6, n_objects=3),
            attack=AttackKind.CRASH_STAGE,
            expected=Expected.RECOVERED_CONSISTENT,
            hook=hook,
            op=op,
            repetitions=repetitions,
        )
        for op in ops
        for hook in hooks
    ]


class ScenarioRunner:
    """
    Runs scenarios in isolated directories under `workdir`. Monitors are opened
    with deterministic timestamps so a crashed run and its reference run produce
    identical leaves.
    """

    def __init__(
        self,
        workdir: str,
        head_tracking: HeadTracking = "leaf",
        child_timeout: float = 120.0,
    ):
        self.workdir = workdir
        self.head_tracking = head_tracking
        self.child_timeout = child_timeout
        self._attacks: Dict[AttackKind, Callable] = {
            AttackKind.REPLAY_STORAGE: self._replay_storage,
            AttackKind.SWAP_STALE_LISTING: self._swap_stale_listing,
            AttackKind.RESURRECT_PRUNED: self._resurrect_pruned,
            AttackKind.TAMPER_LEAF_FILE: self._tamper_leaf_file,
            AttackKind.FORGE_SEAL: self._forge_seal,
            AttackKind.CRASH_STAGE: self._crash_stage,
        }

    def config_for(self, name: str) -> MonitorConfig:
        return MonitorConfig.for_directory(
            os.path.join(self.workdir, name),
            head_tracking=self.head_tracking,
            clock="counter",
        )

    @staticmethod
    def open(config: MonitorConfig) -> ReferenceMonitor:
        return ReferenceMonitor(config, crash_points=CrashPoints())

    @staticmethod
    def counter(config: MonitorConfig) -> int:
        return HardwareRoot(config.trusted_dir).counter_read()

    # -------------------------------------------------------------------------
    # Driver
    # -------------------------------------------------------------------------

    def run_scenario(self, scenario: AttackScenario) -> Verdict:
        config = self.config_for(scenario.name)
        if os.path.exists(config.data_dir):
            shutil.rmtree(config.data_dir)

        monitor = self.open(config)
        keep_snapshots = scenario.attack in (
            AttackKind.REPLAY_STORAGE,
            AttackKind.SWAP_STALE_LISTING,
        )
        snapshots = [snapshot_untrusted(config.untrusted_dir)] if keep_snapshots else []
        for step in generate_history(**scenario.setup.model_dump()):
            apply_step(monitor, step)
            if keep_snapshots:
                snapshots.append(snapshot_untrusted(config.untrusted_dir))

        counter_before = monitor.hardware.counter_read()
        try:
            observed, detail = self._attacks[scenario.attack](
                scenario, config, monitor, snapshots
            )
        except Exception as e:  # pylint: disable=broad-except
            observed, detail = None, f"unexpected {type(e).__name__}: {e}"

        verdict = Verdict(
            name=scenario.name,
            attack=scenario.attack,
            expected=scenario.expected,
            observed=observed,
            passed=observed == scenario.expected,
            detail=detail,
            counter_before=counter_before,
            counter_after=self.counter(config),
        )
        if verdict.passed:
            logger.info("Scenario %s: %s.", scenario.name, observed.value)
        else:
            logger.error(
                "Scenario %s expected %s, observed %s: %s",
                scenario.name,
                scenario.expected.value,
                observed.value if observed else "nothing",
                detail,
            )
        return verdict

    def run_all(
        self, scenarios: List[AttackScenario], progress: bool = False
    ) -> List[Verdict]:
        return [
            self.run_scenario(scenario)
            for scenario in tqdm(scenarios, desc="scenarios", disable=not progress)
        ]

    def _reopen_refused(self, config: MonitorConfig) -> Outcome:
        try:
            self.open(config)
        except (StaleStateDetected, TamperDetected, RecoveryHalted) as e:
            return Expected.DETECTED, f"{type(e).__name__}: {e}"
        return None, "stale or altered storage was served as current"

    # -------------------------------------------------------------------------
    # Storage replay and stale listings
    # -------------------------------------------------------------------------

    def _replay_storage(self, scenario, config, monitor, snapshots) -> Outcome:
        restore_untrusted(config.untrusted_dir, snapshots[scenario.prefix])
        return self._reopen_refused(config)

    @staticmethod
    def _newest_checkpoint(snapshot: StorageSnapshot) -> AuthoritativeCheckpoint:
        checkpoints = [
            AuthoritativeCheckpoint.decode(data)
            for relpath, data in snapshot.files.items()
            if relpath.startswith(CHECKPOINT_DIR + os.sep) and relpath.endswith(".bin")
        ]
        return max(checkpoints, key=lambda checkpoint: checkpoint.counter)

    def _swap_stale_listing(self, scenario, config, monitor, snapshots) -> Outcome:
        stale = snapshots[scenario.prefix]

        # a historical checkpoint with its genuine seal, offered to the verifier
        old = self._newest_checkpoint(stale)
        try:
            monitor.auditor.list_snapshots(at=old)
            return None, f"listing under historical checkpoint {old.counter} was accepted"
        except StaleStateDetected:
            pass

        restore_untrusted(
            config.untrusted_dir,
            stale,
            only=[os.path.join(PAD_DIR, f"{REGISTRY}.pad"), CHECKPOINT_DIR],
        )
        return self._reopen_refused(config)

    # -------------------------------------------------------------------------
    # Resurrection
    # -------------------------------------------------------------------------

    @staticmethod
    def _prunable(monitor: ReferenceMonitor) -> Optional[Target]:
        at = monitor.checkpoint
        for (obj, version), index in sorted(monitor.state.index.versions.items()):
            if index < at.catalog_size and monitor.state.tombstone(obj, version, at) is None:
                return Target(object=obj, version=version)
        return None

    def _resurrect_pruned(self, scenario, config, monitor, snapshots) -> Outcome:
        tombstones = monitor.auditor.list_tombstones()
        if not tombstones:
            victim = self._prunable(monitor)
            if victim is None:
                return None, "setup left nothing to prune"
            monitor.prune(
                PruneRequest(
                    mode=RollbackMode.SELECTIVE,
                    targets=[victim],
                    reason=PruneReason.CVE,
                    actor="harness",
                    justification="seeded for resurrection",
                )
            )
            tombstones = monitor.auditor.list_tombstones()

        requests = [
            RollbackRequest(
                mode=RollbackMode.SELECTIVE,
                targets=[Target(object=t.object, version=t.version)],
                actor="insider",
                justification="restore pruned build",
            )
            for t in tombstones
        ]
        requests.extend(
            RollbackRequest(mode=RollbackMode.SNAPSHOT, tag=listing.tag, actor="insider")
            for listing in monitor.auditor.list_snapshots()
            if listing.pruned_members
        )

        counter = monitor.hardware.counter_read()
        log_size = monitor.state.log.size
        for request in requests:
            try:
                monitor.rollback(request)
            except DeAuthorized:
                continue
            return None, f"rollback {request.model_dump(exclude_none=True)} committed"

        if monitor.hardware.counter_read() != counter:
            return None, "the counter moved while resurrection was refused"
        if monitor.state.log.size - log_size != len(requests):
            return None, "refused rollbacks left no intent records"
        return Expected.BLOCKED, f"{len(requests)} resurrection attempts refused"

    # -------------------------------------------------------------------------
    # Leaf tampering
    # -------------------------------------------------------------------------

    @staticmethod
    def _query_pad(monitor: ReferenceMonitor, pad: str) -> None:
        if pad == CATALOG:
            at = monitor.checkpoint
            for obj in monitor.state.index.objects(at.catalog_size):
                monitor.auditor.reconstruct_lineage(obj)
            monitor.auditor.list_tombstones()
        elif pad == REGISTRY:
            monitor.auditor.list_snapshots()
        else:
            monitor.auditor.list_transactions()

    def _tamper_leaf_file(self, scenario, config, monitor, snapshots) -> Outcome:
        position = PAD_NAMES.index(scenario.pad)
        if scenario.index >= monitor.checkpoint.pad_sizes[position]:
            return None, f"'{scenario.pad}' has no committed leaf {scenario.index}"

        before = StateFingerprint.of(monitor)
        counter = monitor.hardware.counter_read()
        tamper_leaf(
            config.untrusted_dir, scenario.pad, scenario.index, scenario.mutation, scenario.byte
        )

        if scenario.mutation == "append":
            reopened = self.open(config)
            report = reopened.last_recovery
            if report is None:
                return None, "the rogue leaf was served as committed"
            if StateFingerprint.of(reopened) != before:
                return None, "recovery changed committed state"
            if reopened.hardware.counter_read() != counter + 2:
                return None, "recovery did not double-increment"
            return Expected.RECOVERED_CONSISTENT, f"discarded {list(report.discarded_leaves)}"

        try:
            self._query_pad(monitor, scenario.pad)
            return None, "a live query accepted the tampered leaf"
        except TamperDetected:
            pass
        return self._reopen_refused(config)

    # -------------------------------------------------------------------------
    # Seal forgery
    # -------------------------------------------------------------------------

    def _forge_seal(self, scenario, config, monitor, snapshots) -> Outcome:
        rng = np.random.default_rng(scenario.setup.seed)
        checkpoint = monitor.checkpoint
        ahead = checkpoint.counter + 1

        for _ in range(scenario.forgeries):
            forged = Seal(tag=rng.bytes(32).hex(), counter=ahead, root=checkpoint.root)
            if monitor.hardware.verify_seal(forged, checkpoint.root, ahead):
                return None, "a random tag verified"

        forged_checkpoint = checkpoint.model_copy(
            update={
                "counter": ahead,
                "seal": Seal(tag=rng.bytes(32).hex(), counter=ahead, root=checkpoint.root),
            }
        )
        with open(monitor.state.slot_path(ahead), "wb") as file:
            file.write(forged_checkpoint.encode())

        reopened = self.open(config)
        if reopened.last_recovery is not None or reopened.checkpoint.counter != checkpoint.counter:
            return None, "a forged checkpoint steered recovery"
        return Expected.BLOCKED, f"{scenario.forgeries} forged tags rejected"

    # -------------------------------------------------------------------------
    # Crash staging
    # -------------------------------------------------------------------------

    @staticmethod
    def _crash_object_versions(monitor: ReferenceMonitor) -> List[int]:
        at = monitor.checkpoint
        return sorted(
            version
            for (obj, version), index in monitor.state.index.versions.items()
            if obj == CRASH_OBJECT
            and index < at.catalog_size
            and monitor.state.tombstone(obj, version, at) is None
        )

    def _crash_step(self, op: Operation, monitor: ReferenceMonitor, txid: str) -> HistoryStep:
        counter = monitor.checkpoint.counter
        if op == Operation.UPDATE:
            return HistoryStep(
                op=op, txid=txid, changes={CRASH_OBJECT: f"crash-{counter}"}
            )
        if op == Operation.SNAPSHOT:
            return HistoryStep(
                op=op, txid=txid, tag=f"crash-{counter}", members=[CRASH_OBJECT]
            )

        versions = self._crash_object_versions(monitor)
        if op == Operation.ROLLBACK:
            target = versions[0]
        else:
            head = monitor.state.current_head(CRASH_OBJECT, monitor.checkpoint)
            target = next(v for v in versions if head is None or v != head[0])
        return HistoryStep(
            op=op,
            txid=txid,
            mode=RollbackMode.SELECTIVE,
            targets=[Target(object=CRASH_OBJECT, version=target)],
            reason=PruneReason.CVE,
        )

    def _reference(self, config: MonitorConfig, step: HistoryStep) -> StateFingerprint:
        """Apply `step` to a copy of the data directory without crashing."""
        reference = self.config_for(os.path.basename(config.data_dir) + "-reference")
        clone_directory(config.data_dir, reference.data_dir)
        try:
            monitor = self.open(reference)
            apply_step(monitor, step)
            return StateFingerprint.of(monitor)
        finally:
            shutil.rmtree(reference.data_dir, ignore_errors=True)

    def _crash_stage(self, scenario, config, monitor, snapshots) -> Outcome:
        rng = np.random.default_rng(scenario.setup.seed)
        for n in range(scenario.repetitions + 1):
            monitor.update({CRASH_OBJECT: f"seed-{n}".encode()}, actor="harness")

        legal, jump = CRASH_OUTCOMES[scenario.hook]
        for repetition in range(scenario.repetitions):
            current = self.open(config)
            counter = current.hardware.counter_read()
            step = self._crash_step(scenario.op, current, rng.bytes(16).hex())
            states = {
                "before": StateFingerprint.of(current),
                "after": self._reference(config, step),
            }

            result = run_in_child(
                ChildJob(config=config, step=step),
                hook=scenario.hook,
                timeout=self.child_timeout,
            )
            if not result.crashed:
                return None, (
                    f"repetition {repetition}: child exited {result.returncode} "
                    f"without reaching '{scenario.hook}': {result.stderr[-500:]}"
                )

            recovered = self.open(config)
            fingerprint = StateFingerprint.of(recovered)
            if fingerprint != states[legal]:
                other = "after" if legal == "before" else "before"
                found = other if fingerprint == states[other] else "neither legal state"
                return None, f"repetition {repetition}: expected {legal}, found {found}"
            advanced = recovered.hardware.counter_read() - counter
            if advanced != jump:
                return None, f"repetition {repetition}: counter advanced {advanced}, expected {jump}"
            if jump == 2 and recovered.last_recovery is None:
                return None, f"repetition {repetition}: no recovery ran"

        return Expected.RECOVERED_CONSISTENT, (
            f"{scenario.repetitions} crashes at '{scenario.hook}' recovered to the {legal} state"
        )
