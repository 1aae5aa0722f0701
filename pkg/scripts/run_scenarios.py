"""
Run Attack Scenarios

Runs every scenario in data/scenarios.json (and, with --crash-matrix, a crash at
every protocol hook for every operation) against private monitors under a scratch
directory, appending one JSON verdict per line to the report file. Exits nonzero
if any scenario did not produce its expected outcome.
"""

import os
import sys
import tempfile

from rollguard.constants import SCENARIO_FILE
from rollguard.harness.scenarios import ScenarioRunner, crash_matrix, load_scenarios
from rollguard.logger_conf import get_logger

REPORT_FILE = os.path.join("data", "scenario_verdicts.jsonl")

logger = get_logger("run_scenarios")


def main(scenario_file: str, report_file: str, include_crash_matrix: bool) -> int:
    scenarios = load_scenarios(scenario_file)
    if include_crash_matrix:
        scenarios.extend(crash_matrix())

    with tempfile.TemporaryDirectory(prefix="rollguard-scenarios-") as workdir:
        verdicts = ScenarioRunner(workdir).run_all(scenarios, progress=True)

    with open(report_file, "a") as file:
        for verdict in verdicts:
            file.write(verdict.model_dump_json() + "\n")

    failed = [verdict for verdict in verdicts if not verdict.passed]
    logger.info(
        "%s of %s scenarios passed; verdicts appended to %s.",
        len(verdicts) - len(failed),
        len(verdicts),
        report_file,
    )
    return 1 if failed else 0


if __name__ == "__main__":

    args = [arg for arg in sys.argv[1:] if arg != "--crash-matrix"]
    if len(args) > 2:
        print("Usage: python scripts/run_scenarios.py [scenarios.json] [report.jsonl] [--crash-matrix]")
        sys.exit(2)

    scenario_file = args[0] if args else SCENARIO_FILE
    report_file = args[1] if len(args) > 1 else REPORT_FILE
    sys.exit(main(scenario_file, report_file, "--crash-matrix" in sys.argv))
