import os

import pytest

from rollguard import CrashPoints, ReferenceMonitor
from rollguard.config import MonitorConfig

BASE_DIR = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(BASE_DIR, "data")

ACTOR = "alice"


def golden_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


@pytest.fixture
def make_config(tmp_path):
    """
    Factory for configs on fresh directories under tmp_path. Timestamps follow the
    counter so runs are reproducible.
    """
    created = []

    def factory(name: str = None, **overrides) -> MonitorConfig:
        name = name or f"store-{len(created)}"
        overrides.setdefault("clock", "counter")
        config = MonitorConfig.for_directory(str(tmp_path / name), **overrides)
        created.append(config)
        return config

    return factory


@pytest.fixture
def make_monitor(make_config):
    """Factory for monitors that ignore any crash hook armed in the environment."""

    def factory(name: str = None, crash_points: CrashPoints = None, **overrides):
        config = make_config(name, **overrides)
        return ReferenceMonitor(config, crash_points=crash_points or CrashPoints())

    return factory


@pytest.fixture
def monitor(make_monitor):
    return make_monitor("store")
