import os
import sys
from collections import Counter
from typing import List, Literal, Optional

from rollguard._exceptions import SimulatedCrash
from rollguard.constants import ALL_HOOKS, CRASH_EXIT_CODE, CRASH_HOOK_ENV, CRASH_MODE_ENV

CrashMode = Literal["raise", "exit"]


class CrashPoints:
    """
    Named crash-injection points. Every protocol step boundary and durability point
    calls `hook(name)`; when armed for that name, the n-th firing either raises
    `SimulatedCrash` (in-process) or terminates the process without cleanup.
    """

    def __init__(
        self,
        hook: Optional[str] = None,
        nth: int = 1,
        mode: CrashMode = "raise",
    ):
        self.fired: Counter = Counter()
        self.trace: List[str] = []
        self._armed: Optional[str] = None
        self._nth = 1
        self._mode: CrashMode = mode
        if hook is not None:
            self.arm(hook, nth=nth, mode=mode)

    @classmethod
    def from_env(cls) -> "CrashPoints":
        spec = os.getenv(CRASH_HOOK_ENV, "").strip()
        mode = os.getenv(CRASH_MODE_ENV, "exit").strip() or "exit"
        if not spec:
            return cls()
        name, _, nth = spec.partition("@")
        return cls(hook=name, nth=int(nth) if nth else 1, mode=mode)

    @property
    def armed(self) -> Optional[str]:
        return self._armed

    def arm(self, hook: str, nth: int = 1, mode: CrashMode = "raise") -> None:
        if hook not in ALL_HOOKS:
            raise ValueError(f"Unknown crash hook '{hook}'.")
        if nth < 1:
            raise ValueError("'nth' must be a positive integer.")
        if mode not in ("raise", "exit"):
            raise ValueError("'mode' must be either 'raise' or 'exit'.")
        self._armed = hook
        self._nth = nth
        self._mode = mode
        self.fired.clear()

    def disarm(self) -> None:
        self._armed = None

    def hook(self, name: str) -> None:
        self.fired[name] += 1
        self.trace.append(name)
        if name == self._armed and self.fired[name] == self._nth:
            self._armed = None
            self._crash(name)

    def _crash(self, name: str) -> None:
        if self._mode == "exit":
            sys.stdout.flush()
            sys.stderr.flush()
            os._exit(CRASH_EXIT_CODE)
        raise SimulatedCrash(name)
