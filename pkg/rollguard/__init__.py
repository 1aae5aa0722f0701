from pydantic import ValidationError

from ._audit import Auditor
from ._content_store import ContentStore
from ._crash import CrashPoints
from ._exceptions import (
    DeAuthorized,
    EligibilityError,
    RecoveryHalted,
    RecoveryRequired,
    RollguardException,
    StaleStateDetected,
    TamperDetected,
)
from ._hardware import HardwareRoot
from ._merkle import MerkleTree, PersistentPad
from ._monitor import ReferenceMonitor
from ._state import StateStore, aggregate_root
from .config import MonitorConfig, load_config

__version__ = "0.1.0"
