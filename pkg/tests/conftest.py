"""Shared test plumbing: the acceptance suite records one line per criterion
and the session summary prints them all, pass or fail."""

from pathlib import Path

_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    _CRITERIA.append((name, passed, detail))


def check_criterion(name: str, passed: bool, detail: str = "") -> None:
    """Record and assert in one step so the summary always carries the verdict."""
    record_criterion(name, passed, detail)
    assert passed, f"acceptance criterion failed: {name} ({detail})"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    lines = ["", "acceptance criteria:"]
    for name, passed, detail in _CRITERIA:
        verdict = "PASS" if passed else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        lines.append(f"  {verdict}  {name}{suffix}")
    for line in lines:
        terminalreporter.write_line(line)
    report = Path(__file__).resolve().parent.parent / "acceptance_report.txt"
    report.write_text("\n".join(lines[1:]) + "\n")
