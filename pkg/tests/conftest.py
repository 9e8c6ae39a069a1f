import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import RECORDS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not RECORDS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RECORDS:
        terminalreporter.write_line(line)
