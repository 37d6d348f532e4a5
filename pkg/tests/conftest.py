import time

import pytest

_RESULTS = {}


class Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""
        self.start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.start


@pytest.fixture
def criterion(request):
    """Times an acceptance criterion and records its verdict for the summary."""
    marker = request.node.get_closest_marker("criterion")
    number, title, budget = marker.args
    c = Criterion(number, title, budget)
    yield c
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    _RESULTS[number] = (title, passed, c.elapsed(), budget, c.detail)
    print(f"\ncriterion {number}: {'PASS' if passed else 'FAIL'} - {title} "
          f"({c.elapsed():.1f}s of {budget}s) {c.detail}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, budget): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, elapsed, budget, detail = _RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title} "
            f"({elapsed:.1f}s, budget {budget}s) {detail}"
        )
