import pytest

from rollguard._crash import CrashPoints
from rollguard._exceptions import SimulatedCrash
from rollguard.constants import CRASH_HOOK_ENV, CRASH_MODE_ENV


def test_unarmed_hooks_only_record():

    crash = CrashPoints()
    crash.hook("validated")
    crash.hook("sealed")
    crash.hook("validated")

    assert crash.fired["validated"] == 2
    assert crash.trace == ["validated", "sealed", "validated"]


def test_fires_on_nth_call_then_disarms():

    crash = CrashPoints("catalog_leaf_appended", nth=3)
    crash.hook("catalog_leaf_appended")
    crash.hook("catalog_leaf_appended")

    with pytest.raises(SimulatedCrash) as exc_info:
        crash.hook("catalog_leaf_appended")
    assert exc_info.value.hook == "catalog_leaf_appended"
    assert crash.armed is None

    crash.hook("catalog_leaf_appended")


def test_simulated_crash_escapes_broad_handlers():

    crash = CrashPoints("sealed")
    with pytest.raises(SimulatedCrash):
        try:
            crash.hook("sealed")
        except Exception:  # pylint: disable=broad-except
            pytest.fail("SimulatedCrash must not be an Exception.")


def test_arm_validation():

    crash = CrashPoints()
    with pytest.raises(ValueError) as exc_info:
        crash.arm("nowhere")
    assert str(exc_info.value) == "Unknown crash hook 'nowhere'."

    with pytest.raises(ValueError):
        crash.arm("sealed", nth=0)

    with pytest.raises(ValueError):
        crash.arm("sealed", mode="explode")


def test_from_env(monkeypatch):

    monkeypatch.delenv(CRASH_HOOK_ENV, raising=False)
    assert CrashPoints.from_env().armed is None

    monkeypatch.setenv(CRASH_HOOK_ENV, "counter_advanced@2")
    monkeypatch.setenv(CRASH_MODE_ENV, "raise")
    crash = CrashPoints.from_env()
    assert crash.armed == "counter_advanced"

    crash.hook("counter_advanced")
    with pytest.raises(SimulatedCrash):
        crash.hook("counter_advanced")
