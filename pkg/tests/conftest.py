import pytest
from hypothesis import HealthCheck, settings

from icfoot.synth import build_dual_row, build_grid, build_two_pad

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def soic8():
    return build_dual_row("SOIC", 8, 1.27, 0.6, 1.5, 5.4)


@pytest.fixture
def bga16():
    return build_grid("BGA", 4, 4, 1.0, 0.5)


@pytest.fixture
def chip2():
    return build_two_pad("CHIP2", 3.0, 0.9, 1.6)




_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_acceptance_"):
        return
    if report.when == "call" or report.failed:
        detail = [value for key, value in report.user_properties if key == "detail"]
        prev = _CRITERIA.get(name)
        ok = report.passed and (prev is None or prev[0])
        _CRITERIA[name] = (ok, detail[-1] if detail else (prev[1] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        ok, detail = _CRITERIA[name]
        number, _, label = name.removeprefix("test_acceptance_").partition("_")
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number} {label.replace('_', ' ')}: {verdict}  {detail}")
