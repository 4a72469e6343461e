from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((number, title, bool(ok), detail))
        print(f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
