"""Shared test helpers.

The acceptance tests record one human-readable pass/fail line each;
those lines are replayed in a terminal section after the run so the
verdict survives pytest's output capturing.
"""

_ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    line = f"{status}  {name}"
    if detail:
        line += f"  [{detail}]"
    _ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
