import pytest

from heckeendo.goldens import CASES, case_system
from heckeendo.polyring import lattice_preset
from heckeendo.rootsys import build_root_system

# every distinct (type, rank, lattice) used by a named case
LATTICE_CASES = sorted({(c.type_label, c.rank, c.lattice) for c in CASES.values()})


def lattice_of(type_label, rank, name):
    return lattice_preset(name, build_root_system(type_label, rank))


@pytest.fixture(params=sorted(CASES), scope="module")
def preset(request):
    cs, L, p = case_system(request.param)
    return request.param, cs, L, p


_criteria: dict[int, list[str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria.setdefault(marker.args[0], []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        status = "PASS" if all(r == "passed" for r in results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status} ({results.count('passed')}/{len(results)} checks)")
