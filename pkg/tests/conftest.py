import pytest

from qbranch.cnf import CnfFormula, all_assignments, evaluate_assignment

TWO_CLAUSE = CnfFormula(3, ((1, -2), (2, 3)), name="two_clause")


def naive_is_sat(formula: CnfFormula) -> bool:
    """Independent oracle for small formulas: plain itertools enumeration."""
    return any(evaluate_assignment(formula, a) for a in all_assignments(formula.num_vars))


@pytest.fixture
def two_clause():
    return TWO_CLAUSE


# -- acceptance summary: one pass/fail line per criterion ---------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "failed": False, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed or report.skipped:
        entry["failed"] = True
        entry["skipped"] = report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "SKIP" if e.get("skipped") else "FAIL" if e["failed"] or not e["ran"] else "PASS"
        terminalreporter.write_line(f"{status}  criterion {number:2d}: {e['title']}")
