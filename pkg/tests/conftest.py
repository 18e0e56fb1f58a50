import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from telemine.core import AlignedLog

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = {}
_NOTES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: end-to-end runs taking tens of seconds")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    num, title = marker
    _, prev, total = _ACCEPTANCE.get(num, (title, None, 0.0))
    status = prev
    if report.when == "call" or report.outcome != "passed":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        # a criterion spread over several tests fails if any part fails
        if prev == "FAIL" or (prev == "PASS" and status == "SKIP"):
            status = prev
    # setup counts too: shared end-to-end runs live in fixtures
    _ACCEPTANCE[num] = (title, status, total + report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, status, dt = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {status:4s} {title} ({dt:.1f}s)")
        for line in _NOTES.get(num, []):
            terminalreporter.write_line(f"    {line}")


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary of this test's criterion."""
    m = request.node.get_closest_marker("criterion")
    num = m.args[0] if m else None
    return lambda line: _NOTES.setdefault(num, []).append(line)


def make_log(data, labels=None, log_id="log0", channels=None, types=None):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    T, d = data.shape
    labels = np.zeros(T, dtype=np.int8) if labels is None else np.asarray(labels, dtype=np.int8)
    channels = channels or [f"c{j}" for j in range(d)]
    return AlignedLog(log_id, channels, data, labels, types or ())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
