import numpy as np
import pytest

from fracgraph.graphmodel import build_loop, build_star, build_tree


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def star3():
    return build_star(3, [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5)


@pytest.fixture
def star124():
    return build_star(3, [1.0, 2.0, 4.0], [1.0, 1.0, 1.0], 0.5)


@pytest.fixture
def tree():
    lengths = {"1": 1.0, "11": 0.8, "12": 1.2, "111": 0.6, "112": 1.0, "121": 0.9, "122": 0.7}
    weights = {"1": 1.0, "11": 2.0, "12": 0.5, "11'": 1.5, "12'": -1.0,
               "111": 1.0, "112": 0.7, "121": 1.3, "122": 2.0}
    return build_tree(lengths, weights, 0.5)


@pytest.fixture
def loop():
    weights = {"1": 1.0, "2": 1.5, "3": 0.5, "2'": 2.0, "3'": 1.0, "4": 0.8}
    return build_loop([1.0, 2.0, 3.0, 1.0], weights, 0.5)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; the lines are repeated in the summary."""
    def record(number, name, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
