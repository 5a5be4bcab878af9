"""Per-criterion PASS/FAIL reporting for the acceptance suite.

Acceptance tests carry ``@pytest.mark.criterion(n, "title")``.  A criterion
passes only if every test tagged with it passed; an expected failure counts
as FAIL so the summary never hides a known shortfall.
"""

import pytest

_outcomes: dict = {}
_titles: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    _titles.setdefault(n, mark.args[1] if len(mark.args) > 1 else "")
    if rep.when == "call" or rep.outcome != "passed":
        ok = rep.passed and not hasattr(rep, "wasxfail")
        _outcomes.setdefault(n, []).append((item.name, ok))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        status = "PASS" if all(ok for _, ok in results) else "FAIL"
        tr.write_line(f"criterion {n:2d}: {status}  {_titles[n]}")
        for name, ok in results:
            if not ok:
                tr.write_line(f"              failing: {name}")
