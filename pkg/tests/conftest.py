import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def cache_dir() -> Path:
    """Persistent eigen-system cache shared by tests, scripts and the CLI (override with TRIPLEWELL_CACHE)."""
    path = Path(os.environ.get("TRIPLEWELL_CACHE", ROOT / ".cache"))
    path.mkdir(parents=True, exist_ok=True)
    return path


_ACCEPTANCE: list[tuple[int, str]] = []


@pytest.fixture
def record_criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
