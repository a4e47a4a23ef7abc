from pathlib import Path

import pytest

RECIPES = Path(__file__).resolve().parent.parent / "recipes"
_REPORT: list[str] = []


@pytest.fixture(scope="session")
def recipes_dir() -> Path:
    return RECIPES


@pytest.fixture(scope="session")
def criterion_report():
    """Callable recording one verdict line per acceptance criterion."""
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _REPORT.append(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
