import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from hierdialog import kernels  # noqa: E402
from hierdialog.corpus import Instance, Query, Turn  # noqa: E402


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    previous = kernels.backend_name()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture
def two_turn():
    return Instance(
        "ex1",
        (Turn("Speaker 1", "hi Frank"), Turn("Frank", "hello")),
        Query(("Speaker 1", "Frank")),
        0,
    )


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite tests/golden from current output")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
