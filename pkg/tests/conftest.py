import numpy as np
import pytest

from tsvf_lab import scenarios

_CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line per criterion test; printed in the terminal summary."""
    entry = {"name": request.node.name, "doc": (request.function.__doc__ or "").strip().splitlines()[0]}
    _CRITERIA.append(entry)
    yield entry


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        for entry in _CRITERIA:
            if entry["name"] == item.name and "passed" not in entry:
                entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in _CRITERIA:
        status = "PASS" if entry.get("passed") else "FAIL"
        terminalreporter.write_line(f"[{status}] {entry['doc']}")


@pytest.fixture(scope="session")
def nested():
    return scenarios.load("nested_mzi")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
