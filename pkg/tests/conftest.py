from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    from circdiff._kernels import get_backend

    return get_backend(request.param)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for the acceptance summary, then assert."""

    lines = request.config.stash[_ACCEPTANCE]

    def record(number: int, name: str, ok: bool, detail: str = "", counted: bool = True):
        tag = ("PASS" if ok else "FAIL") if counted else "INFO"
        line = f"criterion {number} {tag}: {name}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        if counted:
            assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
