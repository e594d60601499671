"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_OUTCOMES: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    key, title = mark.args
    summary = dict(item.user_properties).get("summary", "")
    # an xfail is a failure of the criterion itself
    passed = rep.passed and not hasattr(rep, "wasxfail")
    if not passed and not summary:
        summary = str(rep.longrepr).strip().splitlines()[-1] if rep.longrepr else "failed"
    prev = _OUTCOMES.get(key)
    _OUTCOMES[key] = (title, passed and (prev is None or prev[1]), summary if prev is None else f"{prev[2]}; {summary}")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_OUTCOMES, key=lambda k: (int("".join(c for c in k[1:] if c.isdigit())), k)):
        title, passed, summary = _OUTCOMES[key]
        tr.write_line(f"{'PASS' if passed else 'FAIL'} {key:<5} {title}: {summary}")
