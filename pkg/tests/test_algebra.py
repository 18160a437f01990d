import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solvctrl.algebra import (
    LieAlgebra,
    Subspace,
    bracket_saturate,
    center,
    derived_series,
    is_solvable,
    lower_central_series,
    nilpotency_class,
    nilradical,
    quotient_algebra,
)
from solvctrl.errors import (
    DimensionMismatch,
    JacobiViolation,
    NotAnIdeal,
    NotAntisymmetric,
    NotSolvable,
)

from conftest import e2_algebra, h3_algebra, n4_algebra


def test_bracket_readoff(h3):
    e = np.eye(3)
    np.testing.assert_array_equal(h3.bracket(e[0], e[1]), e[2])
    np.testing.assert_array_equal(h3.bracket(e[0], e[0]), 0)
    np.testing.assert_array_equal(h3.bracket(e[1], e[0]), -e[2])


def test_bracket_dimension_mismatch(h3):
    with pytest.raises(DimensionMismatch):
        h3.bracket(np.ones(2), np.ones(3))


def test_bracket_batched_matches_loop(n4, rng):
    a = rng.normal(size=(5, 4))
    b = rng.normal(size=(5, 4))
    batched = n4.bracket(a, b)
    for i in range(5):
        np.testing.assert_allclose(batched[i], n4.bracket(a[i], b[i]))


def test_ad_matrix_matches_bracket(n4, rng):
    x, y = rng.normal(size=(2, 4))
    np.testing.assert_allclose(n4.ad(x) @ y, n4.bracket(x, y))


def test_invalid_tables_rejected():
    c = np.zeros((3, 3, 3))
    c[0, 1, 2] = 1.0
    with pytest.raises(NotAntisymmetric):
        LieAlgebra(c)
    with pytest.raises(JacobiViolation):
        LieAlgebra.from_triples(3, [(1, 2, 3, 1), (1, 3, 1, 1)])


def test_triples_round_trip(n4):
    again = LieAlgebra.from_triples(4, n4.to_triples())
    assert again.same_table(n4)


def test_center_examples(h3, n4):
    assert center(h3).equals(Subspace.span([[0, 0, 1]], 3))
    assert center(LieAlgebra.abelian(3)).dim == 3
    assert center(n4).equals(Subspace.span([[0, 0, 0, 1]], 4))


def test_nilpotency_class(h3, n4, e2):
    assert nilpotency_class(h3) == 2
    assert nilpotency_class(LieAlgebra.abelian(4)) == 1
    assert nilpotency_class(n4) == 3
    assert nilpotency_class(e2) is None
    dims = [s.dim for s in lower_central_series(n4)]
    assert dims == [4, 2, 1]


def test_solvability(h3, e2, sl2):
    assert is_solvable(h3)
    assert is_solvable(e2)
    assert [s.dim for s in derived_series(e2)] == [3, 2, 0]
    assert not is_solvable(sl2)
    assert derived_series(sl2)[-1].dim == 3


def test_nilradical_examples(h3, e2):
    assert nilradical(h3).dim == 3
    assert nilradical(e2).equals(Subspace.span([[0, 1, 0], [0, 0, 1]], 3))
    assert nilradical(LieAlgebra.abelian(3)).dim == 3


def test_nilradical_of_non_nilpotent_example():
    # r = span{t} + h3 with t acting diagonally by (1, 1, 2): nilradical is h3
    g = LieAlgebra.from_triples(
        4, [(2, 3, 4, 1), (1, 2, 2, 1), (1, 3, 3, 1), (1, 4, 4, 2)], ["t", "x", "y", "z"]
    )
    N = nilradical(g)
    assert N.equals(Subspace.span(np.eye(4)[1:], 4))


def test_nilradical_guards(sl2, e2):
    with pytest.raises(NotSolvable):
        nilradical(sl2)
    with pytest.raises(NotAnIdeal):
        nilradical(e2, candidate=np.array([[1.0, 0, 0]]).T)


def test_nilradical_accepts_valid_candidate(e2):
    cand = np.array([[0, 1.0, 0], [0, 0, 1.0]]).T
    assert nilradical(e2, candidate=cand).dim == 2


def test_quotients(h3, n4):
    q = quotient_algebra(h3, center(h3))
    assert q.algebra.dim == 2 and q.algebra.is_abelian
    q = quotient_algebra(n4, center(n4))
    assert q.algebra.same_table(h3_algebra())
    q = quotient_algebra(n4, Subspace.full(4))
    assert q.algebra.dim == 0
    q = quotient_algebra(n4, Subspace.zero(4))
    assert q.algebra.same_table(n4)
    with pytest.raises(NotAnIdeal):
        quotient_algebra(h3, Subspace.span([[1, 0, 0]], 3))


def test_quotient_projection_is_homomorphism(n4, rng):
    q = quotient_algebra(n4, center(n4))
    x, y = rng.normal(size=(2, 4))
    np.testing.assert_allclose(q.project(n4.bracket(x, y)), q.algebra.bracket(q.project(x), q.project(y)), atol=1e-12)


def test_bracket_saturate_examples(h3):
    assert bracket_saturate(h3, Subspace.span(np.eye(3)[:2], 3)).dim == 3
    s = bracket_saturate(h3, Subspace.span([[1, 0, 0]], 3), [np.diag([1.0, 1.0, 2.0])])
    assert s.equals(Subspace.span([[1, 0, 0]], 3))
    assert bracket_saturate(h3, Subspace.zero(3)).dim == 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=3), st.sampled_from(["h3", "n4", "e2"]))
def test_saturation_monotone_and_idempotent(idx, name):
    g = {"h3": h3_algebra, "n4": n4_algebra, "e2": e2_algebra}[name]()
    seed = Subspace.span(np.eye(g.dim)[[i % g.dim for i in idx]], g.dim)
    s = bracket_saturate(g, seed)
    assert seed.issubspace(s)
    assert bracket_saturate(g, s).equals(s)
