import os
from concurrent.futures import ThreadPoolExecutor

import pytest

from rollguard import HardwareRoot
from rollguard._crash import CrashPoints
from rollguard._exceptions import HardwareRootError, SimulatedCrash
from rollguard.constants import COUNTER_FILE, KEY_FILE

ROOT = "ab" * 32
OTHER_ROOT = "cd" * 32


@pytest.fixture
def hardware(tmp_path):
    return HardwareRoot(str(tmp_path / "trusted"))


def test_counter_starts_at_zero_and_persists(tmp_path):

    hardware = HardwareRoot(str(tmp_path / "trusted"))
    assert hardware.counter_read() == 0
    assert hardware.counter_increment() == 1
    assert hardware.counter_increment() == 2
    assert hardware.counter_double_increment() == 4

    reopened = HardwareRoot(str(tmp_path / "trusted"))
    assert reopened.counter_read() == 4


def test_seal_binds_root_and_counter(hardware):

    seal = hardware.seal(ROOT, 7)
    assert seal.counter == 7
    assert seal.root == ROOT
    assert hardware.verify_seal(seal, ROOT, 7)

    # any change to root or counter invalidates the seal
    assert not hardware.verify_seal(seal, OTHER_ROOT, 7)
    assert not hardware.verify_seal(seal, ROOT, 8)
    forged = seal.model_copy(update={"counter": 8})
    assert not hardware.verify_seal(forged, ROOT, 8)


def test_seal_rejects_random_tags(hardware):

    seal = hardware.seal(ROOT, 3)
    for i in range(64):
        tag = bytes([i]) * 32
        assert not hardware.verify_seal(seal.model_copy(update={"tag": tag.hex()}), ROOT, 3)


def test_seal_key_survives_reopen(tmp_path):

    first = HardwareRoot(str(tmp_path / "trusted"))
    seal = first.seal(ROOT, 1)

    second = HardwareRoot(str(tmp_path / "trusted"))
    assert second.verify_seal(seal, ROOT, 1)

    # a different trusted module cannot verify it
    stranger = HardwareRoot(str(tmp_path / "elsewhere"))
    assert not stranger.verify_seal(seal, ROOT, 1)


def test_tampered_counter_file_is_rejected(tmp_path):

    trusted = tmp_path / "trusted"
    hardware = HardwareRoot(str(trusted))
    hardware.counter_increment()

    path = trusted / COUNTER_FILE
    record = bytearray(path.read_bytes())
    record[7] ^= 0x01
    path.write_bytes(bytes(record))

    with pytest.raises(HardwareRootError) as exc_info:
        HardwareRoot(str(trusted))
    assert str(exc_info.value) == "Counter record failed authentication."


def test_short_key_file_is_rejected(tmp_path):

    trusted = tmp_path / "trusted"
    os.makedirs(trusted)
    (trusted / KEY_FILE).write_bytes(b"short")

    with pytest.raises(HardwareRootError):
        HardwareRoot(str(trusted))


def test_crash_before_counter_rename_keeps_old_value(tmp_path):

    crash = CrashPoints("counter_staged")
    hardware = HardwareRoot(str(tmp_path / "trusted"), crash)

    with pytest.raises(SimulatedCrash):
        hardware.counter_increment()

    assert HardwareRoot(str(tmp_path / "trusted")).counter_read() == 0


def test_handles_share_one_durable_counter(tmp_path):

    first = HardwareRoot(str(tmp_path / "trusted"))
    second = HardwareRoot(str(tmp_path / "trusted"))

    assert first.counter_increment() == 1
    assert second.counter_increment() == 2
    assert first.counter_read() == 2
    assert first.counter_double_increment() == 4
    assert second.counter_read() == 4


def test_counter_steps_are_serialized_across_handles(tmp_path):

    handles = [HardwareRoot(str(tmp_path / "trusted")) for _ in range(4)]
    with ThreadPoolExecutor(max_workers=len(handles)) as pool:
        chunks = list(pool.map(lambda h: [h.counter_increment() for _ in range(10)], handles))

    assert sorted(value for chunk in chunks for value in chunk) == list(range(1, 41))
    assert HardwareRoot(str(tmp_path / "trusted")).counter_read() == 40


def test_exclusive_is_reentrant(hardware):

    with hardware.exclusive():
        with hardware.exclusive():
            assert hardware.counter_increment() == 1
        assert hardware.counter_increment() == 2
    assert hardware.counter_read() == 2


def test_missing_counter_record_is_an_error(tmp_path):

    trusted = tmp_path / "trusted"
    hardware = HardwareRoot(str(trusted))
    hardware.counter_increment()
    os.remove(trusted / COUNTER_FILE)

    with pytest.raises(HardwareRootError):
        hardware.counter_read()
    with pytest.raises(HardwareRootError):
        hardware.counter_increment()
