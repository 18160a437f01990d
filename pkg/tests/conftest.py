import numpy as np
import pytest

from solvctrl.algebra import LieAlgebra
from solvctrl.catalog import example


def h3_algebra():
    return LieAlgebra.from_triples(3, [(1, 2, 3, 1)])


def n4_algebra():
    return LieAlgebra.from_triples(4, [(1, 2, 3, 1), (1, 3, 4, 1)])


def e2_algebra():
    return LieAlgebra.from_triples(3, [(1, 2, 3, 1), (1, 3, 2, -1)], ["T", "X", "Y"])


def sl2_algebra():
    # [h, e] = 2e, [h, f] = -2f, [e, f] = h
    return LieAlgebra.from_triples(3, [(1, 2, 2, 2), (1, 3, 3, -2), (2, 3, 1, 1)], ["h", "e", "f"])


@pytest.fixture
def h3():
    return h3_algebra()


@pytest.fixture
def n4():
    return n4_algebra()


@pytest.fixture
def e2():
    return e2_algebra()


@pytest.fixture
def sl2():
    return sl2_algebra()


@pytest.fixture
def h3_system():
    return example("heisenberg3").model()


@pytest.fixture
def euclid_product():
    return example("euclid-like").model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Print and record one acceptance line, then assert it."""

    def record(number: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
