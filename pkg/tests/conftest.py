import pytest

from datamarket import SimConfig

_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    number = getattr(report, "acceptance_number", None)
    if number is None:
        return
    entry = _ACCEPTANCE.setdefault(number, {"title": report.acceptance_title, "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
        entry["detail"] = report.longreprtext.strip().splitlines()[-1] if report.longreprtext else ""
    elif report.skipped and report.when == "setup":
        entry["passed"] = None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        rep.acceptance_number = mark.args[0]
        rep.acceptance_title = mark.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[e["passed"]]
        line = f"[{status}] {number:2d}. {e['title']}"
        if e["passed"] is False and e["detail"]:
            line += f"  ({e['detail']})"
        tr.write_line(line)


@pytest.fixture
def small_cfg():
    return SimConfig(initial_buyers=6, initial_sellers=4, max_steps=12, rng_seed=7)
