import pytest

ACCEPTANCE_TITLES = {
    1: "correctness sandwich",
    2: "analytic distance oracle",
    3: "finiteness",
    4: "H-sequence equality",
    5: "convergence exponent",
    6: "scalarization duality",
    7: "cut validity",
    8: "vertex-enumeration oracle",
    9: "membership dichotomy",
    10: "norm generality",
}


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def acceptance(request):
    """Record the verdict of one acceptance criterion: ``acceptance(n, ok, detail)``."""
    store = request.config._acceptance

    def record(n, ok, detail=""):
        store[n] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config._acceptance
    ran = [i for i in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
           if "test_acceptance" in i.nodeid]
    if not store and not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in ACCEPTANCE_TITLES.items():
        if n in store:
            ok, detail = store[n]
            terminalreporter.write_line(f"criterion {n:2d} {title}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d} {title}: FAIL  (not run or did not complete)")
