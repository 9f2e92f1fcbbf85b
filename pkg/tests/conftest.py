"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""
import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = getattr(item, "originalname", None) or item.name
    if not name.startswith("test_criterion_"):
        return
    if rep.when != "call" and not rep.failed:
        return
    number = int(name.split("_")[2])
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    ok, details = _CRITERIA.get(number, (True, []))
    if detail:
        details = details + [detail]
    elif rep.failed:
        details = details + [f"{item.name}: {rep.when} error"]
    _CRITERIA[number] = (ok and rep.passed, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, details = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {' | '.join(details)}")
