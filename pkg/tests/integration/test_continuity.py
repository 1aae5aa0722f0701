import numpy as np
import pytest

from rollguard import HardwareRoot
from rollguard._exceptions import DeAuthorized, StaleStateDetected
from rollguard.harness.histories import apply_step, generate_history
from rollguard.harness.scenarios import StateFingerprint
from rollguard.harness.storage import restore_untrusted, snapshot_untrusted
from rollguard.models.requests import RollbackMode, RollbackRequest, Target

from ..conftest import ACTOR

HISTORIES = 200
BATCHES = 10


def _plan(seed: int):
    rng = np.random.default_rng(seed)
    return {
        "seed": seed,
        "n_ops": int(rng.integers(1, 51)),
        "n_objects": int(rng.integers(1, 11)),
    }


def _check_history(make_monitor, seed: int):
    name = f"history-{seed}"
    monitor = make_monitor(name)
    untrusted = monitor.config.untrusted_dir
    trusted = monitor.config.trusted_dir

    storage = [snapshot_untrusted(untrusted)]
    checkpoints = [monitor.checkpoint]
    for step in generate_history(**_plan(seed)):
        apply_step(monitor, step)
        storage.append(snapshot_untrusted(untrusted))
        checkpoints.append(monitor.checkpoint)
    final = StateFingerprint.of(monitor)
    counter = HardwareRoot(trusted).counter_read()
    assert counter == monitor.checkpoint.counter == len(storage) - 1

    # every earlier copy of untrusted storage is refused
    for prefix, stale in enumerate(storage[:-1]):
        restore_untrusted(untrusted, stale)
        with pytest.raises(StaleStateDetected):
            make_monitor(name)
        assert HardwareRoot(trusted).counter_read() == counter, f"prefix {prefix} moved the counter"

    restore_untrusted(untrusted, storage[-1])
    current = make_monitor(name)
    assert current.last_recovery is None
    assert StateFingerprint.of(current) == final

    # listings pinned to a historical checkpoint are refused
    for old in checkpoints[:-1]:
        with pytest.raises(StaleStateDetected):
            current.auditor.list_snapshots(at=old)

    # no tombstoned version comes back
    for tombstone in current.auditor.list_tombstones():
        with pytest.raises(DeAuthorized):
            current.rollback(
                RollbackRequest(
                    mode=RollbackMode.SELECTIVE,
                    targets=[Target(object=tombstone.object, version=tombstone.version)],
                    actor=ACTOR,
                )
            )
    for listing in current.auditor.list_snapshots():
        if listing.pruned_members:
            with pytest.raises(DeAuthorized):
                current.rollback(RollbackRequest(mode=RollbackMode.SNAPSHOT, tag=listing.tag, actor=ACTOR))
    assert HardwareRoot(trusted).counter_read() == counter


@pytest.mark.parametrize("batch", range(BATCHES))
def test_random_histories_keep_continuity(make_monitor, batch):

    per_batch = HISTORIES // BATCHES
    for seed in range(batch * per_batch, (batch + 1) * per_batch):
        _check_history(make_monitor, seed)
