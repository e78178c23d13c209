from __future__ import annotations

import json
from pathlib import Path

import pytest

from udi.schema import load_schema
from udi.store import load_tables

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

_acceptance_results: list[tuple[str, str]] = []


def fixture_sources(schema) -> dict[str, str]:
    return {
        e.name: (FIXTURES / f"{e.name}.csv").read_text()
        for e in schema.entities
    }


@pytest.fixture(scope="session")
def desk_schema():
    return load_schema((FIXTURES / "schema.json").read_text())


@pytest.fixture(scope="session")
def desk_store(desk_schema):
    return load_tables(desk_schema, fixture_sources(desk_schema))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def load_fixture_json(name: str):
    return json.loads((FIXTURES / name).read_text())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in str(item.fspath):
        label = item.name.replace("test_", "", 1)
        _acceptance_results.append((label, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label, outcome in _acceptance_results:
        mark = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"[{mark}] {label}")
