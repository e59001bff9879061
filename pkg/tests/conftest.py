"""Shared pytest hooks: one summary line per release criterion.

The release checks live in test_acceptance.py as test_criterion_<N>
functions.  After the run, the terminal summary lists each criterion with
its outcome so the gate can be read at a glance.
"""

import re

import pytest

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")

_TITLES = {
    "1": "staged-plan counting matches exhaustive enumeration",
    "2": "mutation resampling law holds in closed form and Monte Carlo",
    "3": "fitness orders strictly by rank, then by aggregate score",
    "4": "search rediscovers the exact front on the desk-scale instance",
    "5": "evaluator output equals independent per-record replay",
    "6": "population resizing steps by the configured increment",
    "7": "stub-chain walkthroughs reproduce the expected traces",
    "8": "evolved chain beats the one-stage baseline at lower cost",
}

# extra context a criterion may attach to its summary line (measured values)
ACCEPTANCE_NOTES: dict[str, str] = {}


@pytest.fixture
def acceptance_notes():
    return ACCEPTANCE_NOTES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, str] = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            match = _CRITERION.search(getattr(rep, "nodeid", ""))
            if match is None:
                continue
            num = match.group(1)
            if getattr(rep, "failed", False):
                outcomes[num] = "FAIL"
            elif getattr(rep, "skipped", False):
                outcomes.setdefault(num, "SKIP")
            elif getattr(rep, "when", "") == "call" and rep.passed:
                outcomes.setdefault(num, "PASS")
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes, key=int):
        terminalreporter.write_line(
            f"criterion {num}: {outcomes[num]} — {_TITLES.get(num, '')}"
        )
        note = ACCEPTANCE_NOTES.get(num)
        if note:
            terminalreporter.write_line(f"  {note}")
