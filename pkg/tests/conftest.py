import numpy as np
import pytest

from truncreg.expm import ParabolicTrace

_CRITERIA = {}
TRACES = []  # every ParabolicTrace built during the session


def energy_laws_hold(trace, g, h, dim, slack=0.05):
    """Monotone ||w(t_k)|| and the discrete dissipation bound for one trace."""
    e = trace.energy_history
    g2 = h ** dim * float(np.dot(g, g))
    monotone = bool(np.all(np.isfinite(e)) and np.all(np.diff(e) <= 1e-12 * max(e[0], 1e-300)))
    bounded = trace.dissipation <= 0.5 * g2 * (1 + slack) + 1e-300
    return monotone and bounded


@pytest.fixture
def energy_check():
    def check(trace, g, grid):
        assert energy_laws_hold(trace, g, grid.h, grid.dim), "energy law violated"

    return check


def trace_laws_hold(trace, slack=0.05):
    """Same laws from the trace alone: energy_history[0] is ||g||_h."""
    e = trace.energy_history
    monotone = bool(np.all(np.isfinite(e)) and np.all(np.diff(e) <= 1e-12 * max(e[0], 1e-300)))
    return monotone and trace.dissipation <= 0.5 * e[0] ** 2 * (1 + slack) + 1e-300


@pytest.fixture(autouse=True, scope="session")
def _record_traces():
    original = ParabolicTrace.__init__

    def init(self, *args, **kwargs):
        original(self, *args, **kwargs)
        TRACES.append(self)

    ParabolicTrace.__init__ = init
    yield
    ParabolicTrace.__init__ = original


def pytest_collection_modifyitems(items):
    # acceptance last, so it sees every trace built by the unit tests
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
