from pathlib import Path

import pytest

from polycycle.config import load_family

FAMILIES = Path(__file__).resolve().parents[1] / "families"


@pytest.fixture(scope="session")
def families_dir() -> Path:
    return FAMILIES


@pytest.fixture(scope="session")
def bt():
    return load_family(FAMILIES / "bogdanov_takens.yaml")


@pytest.fixture(scope="session")
def pendulum():
    return load_family(FAMILIES / "pendulum.yaml")


@pytest.fixture(scope="session")
def linear():
    return load_family(FAMILIES / "linear.yaml")


_RESULTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def criterion(request):
    """Record one acceptance line: criterion(n, ok, detail)."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def record(n: int, ok: bool, detail: str) -> bool:
        results[n] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
