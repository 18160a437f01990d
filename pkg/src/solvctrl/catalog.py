"""Built-in example systems."""

from __future__ import annotations

import re

import numpy as np

from .algebra import LieAlgebra
from .sysfile import AnalysisConfig, SystemSpec

__all__ = ["EXAMPLES", "example", "example_names"]


def heisenberg3() -> SystemSpec:
    g = LieAlgebra.from_triples(3, [(1, 2, 3, 1)], ["e1", "e2", "e3"])
    return SystemSpec(
        "heisenberg3", g, np.diag([1.0, 1.0, 2.0]), np.eye(3)[:2], (1.0, 1.0),
        analysis=AnalysisConfig(),
    )


def filiform4() -> SystemSpec:
    g = LieAlgebra.from_triples(4, [(1, 2, 3, 1), (1, 3, 4, 1)], ["e1", "e2", "e3", "e4"])
    return SystemSpec(
        "filiform4", g, np.diag([1.0, 1.0, 2.0, 3.0]), np.eye(4)[:2], (1.0, 1.0),
        analysis=AnalysisConfig(),
    )


def euclid_like() -> SystemSpec:
    g = LieAlgebra.from_triples(3, [(1, 2, 3, 1), (1, 3, 2, -1)], ["T", "X", "Y"])
    return SystemSpec(
        "euclid-like", g, np.diag([0.0, 1.0, 1.0]), np.eye(3)[:2], (1.0, 1.0),
        analysis=AnalysisConfig(scan=3),
    )


def abelian(n: int = 2) -> SystemSpec:
    """``R^n`` with a single input; the drift has distinct expanding eigenvalues."""
    if n < 1:
        raise ValueError("dimension must be positive")
    g = LieAlgebra.abelian(n)
    D = np.zeros((n, n))
    for k in range(n // 2):
        w = float(k + 1)
        D[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = [[0.5, w], [-w, 0.5]]
    if n % 2:
        D[n - 1, n - 1] = 0.75
    z = np.zeros(n)
    z[0::2] = 1.0
    return SystemSpec(f"abelian-{n}", g, D, z[None, :], (1.0,))


EXAMPLES = {
    "heisenberg3": heisenberg3,
    "filiform4": filiform4,
    "euclid-like": euclid_like,
    "abelian-n": abelian,
}


def example_names() -> list[str]:
    return ["heisenberg3", "filiform4", "euclid-like", "abelian-2"]


def example(name: str) -> SystemSpec:
    """Catalog entry by name; ``abelian-n`` accepts any ``abelian-<k>``."""
    m = re.fullmatch(r"abelian-(\d+)", name)
    if m:
        return abelian(int(m.group(1)))
    if name == "abelian-n":
        return abelian()
    try:
        return EXAMPLES[name]()
    except KeyError:
        raise KeyError(f"unknown example '{name}' (known: {', '.join(example_names())}, abelian-<k>)") from None
