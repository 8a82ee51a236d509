import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    # one line per acceptance criterion, keyed on the test name
    name = report.nodeid.rpartition("::")[2].partition("[")[0]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(name, "PASS")
        _CRITERIA[name] = "FAIL" if report.outcome != "passed" or prev == "FAIL" else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        num, _, label = name[len("test_criterion_"):].partition("_")
        terminalreporter.write_line(f"criterion {int(num):2d} {_CRITERIA[name]}  {label.replace('_', ' ')}")
