import numpy as np
import pytest

from gnnfair.graph import AttributedGraph


def make_graph(edges, n, s=None, y=None, X=None):
    s = np.zeros(n, dtype=int) if s is None else np.asarray(s)
    y = np.array([i % 2 for i in range(n)]) if y is None else np.asarray(y)
    if X is None:
        X = np.column_stack([s, np.arange(n, dtype=float)])
    return AttributedGraph.from_edges(edges, X, s, y, 0, 1)


@pytest.fixture
def k3():
    return make_graph([(0, 1), (1, 2), (0, 2)], 3)


@pytest.fixture
def p3():
    return make_graph([(0, 1), (1, 2)], 3)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, ok, detail):
        _ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
