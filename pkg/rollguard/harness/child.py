"""
Crash injection in a separate process. The parent writes a job file and starts
`python -m rollguard.harness.child <job.json>` with the crash hook armed through
the environment; the child opens the monitor, applies one step and exits. A crash
terminates the child without any cleanup, so only what reached disk survives.
"""

import os
import subprocess
import sys
import tempfile
from typing import Optional

from pydantic import BaseModel

from rollguard._crash import CrashPoints
from rollguard._monitor import ReferenceMonitor
from rollguard.config import MonitorConfig
from rollguard.constants import CRASH_EXIT_CODE, CRASH_HOOK_ENV, CRASH_MODE_ENV
from rollguard.harness.histories import HistoryStep, apply_step
from rollguard.logger_conf import get_logger

logger = get_logger(__name__)


class ChildJob(BaseModel):
    config: MonitorConfig
    step: HistoryStep
    actor: str = "harness"


class ChildResult(BaseModel):
    returncode: int
    stdout: str
    stderr: str

    @property
    def crashed(self) -> bool:
        return self.returncode == CRASH_EXIT_CODE

    @property
    def committed(self) -> bool:
        return self.returncode == 0


def run_in_child(
    job: ChildJob, hook: Optional[str] = None, nth: int = 1, timeout: float = 120.0
) -> ChildResult:
    env = os.environ.copy()
    env.pop(CRASH_HOOK_ENV, None)
    if hook is not None:
        env[CRASH_HOOK_ENV] = f"{hook}@{nth}"
        env[CRASH_MODE_ENV] = "exit"

    fd, job_path = tempfile.mkstemp(prefix="rollguard-job-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as file:
            file.write(job.model_dump_json())
        completed = subprocess.run(
            [sys.executable, "-m", "rollguard.harness.child", job_path],
            env=env,
            capture_output=True,
            text=True,
            timeout=timeout,
            check=False,
        )
    finally:
        os.remove(job_path)

    result = ChildResult(
        returncode=completed.returncode, stdout=completed.stdout, stderr=completed.stderr
    )
    logger.info(
        "Child for %s exited with %s.",
        job.step.op.value,
        result.returncode,
        extra={"hook": hook, "op": job.step.op.value, "txid": job.step.txid},
    )
    return result


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m rollguard.harness.child <job.json>", file=sys.stderr)
        return 2

    with open(argv[0], "r", encoding="utf-8") as file:
        job = ChildJob.model_validate_json(file.read())

    monitor = ReferenceMonitor(job.config, crash_points=CrashPoints.from_env())
    outcome = apply_step(monitor, job.step, job.actor)
    print(outcome.model_dump_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
