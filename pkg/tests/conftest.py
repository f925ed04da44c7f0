import re

import pytest

ACCEPTANCE: dict = {}  # criterion number -> {"text", "detail", "failed"}

_NUMBER = re.compile(r"test_acceptance\.py::test_(\d+)_")


@pytest.fixture
def criterion():
    """``(start, note)``: name the criterion under test and attach a detail line."""
    current = {}

    def start(number: int, text: str):
        current["entry"] = ACCEPTANCE.setdefault(number, {"text": text, "detail": "", "failed": False})

    def note(detail: str):
        current["entry"]["detail"] = detail

    return start, note


def pytest_runtest_logreport(report):
    m = _NUMBER.search(report.nodeid)
    if not m or not report.failed:
        return
    entry = ACCEPTANCE.setdefault(int(m.group(1)), {"text": report.nodeid, "detail": "", "failed": False})
    entry["failed"] = True
    crash = getattr(report.longrepr, "reprcrash", None)
    entry["detail"] = crash.message.splitlines()[0] if crash else "failed"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[number]
        line = f"[{'FAIL' if entry['failed'] else 'PASS'}] {number:>2}. {entry['text']}"
        if entry["detail"]:
            line += f"  ({entry['detail']})"
        tr.write_line(line)
