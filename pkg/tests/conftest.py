from __future__ import annotations

import pytest

from aqed2.corpus import load_manifest, shipped_manifest

# criterion number -> (passed, one-line detail); filled by test_acceptance.py
CRITERIA: dict = {}


@pytest.fixture(scope="session")
def shipped():
    return load_manifest(shipped_manifest())


@pytest.fixture
def record():
    def _record(number: int, name: str, passed: bool, detail: str) -> None:
        CRITERIA[number] = (name, passed, detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        name, passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number} {name}: {detail}")
