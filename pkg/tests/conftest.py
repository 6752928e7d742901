import sys
from pathlib import Path

# Make the test-only oracle helpers importable as plain modules.
sys.path.insert(0, str(Path(__file__).parent))

# The acceptance tests register one verdict line apiece; echoing them in the
# terminal summary keeps the per-criterion pass/fail visible without -s.
_verdicts: list[str] = []


def record_verdict(line: str) -> None:
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts:
            terminalreporter.write_line(line)
