import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        prev = _CRITERIA.get(crit, True)
        _CRITERIA[crit] = prev and report.outcome == "passed"


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", mark.args))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), ok in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}")
