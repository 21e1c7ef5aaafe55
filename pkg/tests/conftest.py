import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mrqsim import _accel

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def numpy_backend(monkeypatch):
    """Run the test body on the pure-numpy kernels."""
    monkeypatch.setattr(_accel, "USE_NUMBA", False)
    yield


# -- acceptance summary ------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, text = mark.args
    prev = _ACCEPTANCE.get(number, (text, True))
    _ACCEPTANCE[number] = (text, prev[1] and not rep.failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        text, passed = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {text}")
