from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from solvctrl.algebra import LieAlgebra
from solvctrl.derivation import derivation_basis
from solvctrl.errors import AutomorphismCertificateFailed, DetGapTooSmall, NotNilpotent
from solvctrl.nilgroup import (
    GroupAutomorphism,
    bch_words,
    bernoulli,
    curve_invert,
    f_phi_apply,
    f_phi_invert,
    group_of,
)
from solvctrl.verify import random_automorphism

from conftest import h3_algebra, n4_algebra


def upper_triangular(n):
    """Strictly upper triangular n x n matrices with their matrix basis."""
    idx = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mats = []
    for i, j in idx:
        E = np.zeros((n, n))
        E[i, j] = 1.0
        mats.append(E)
    flat = np.array([M.ravel() for M in mats]).T
    d = len(mats)
    c = np.zeros((d, d, d))
    for a in range(d):
        for b in range(d):
            comm = mats[a] @ mats[b] - mats[b] @ mats[a]
            c[a, b] = np.linalg.lstsq(flat, comm.ravel(), rcond=None)[0]
    return LieAlgebra(np.round(c, 12)), np.array(mats)


def to_matrix(mats, x):
    return np.tensordot(x, mats, axes=1)


def from_matrix(mats, M):
    flat = np.array([B.ravel() for B in mats]).T
    return np.linalg.lstsq(flat, M.ravel(), rcond=None)[0]


coords = arrays(np.float64, 6, elements=st.floats(-2, 2))


def test_bernoulli_values():
    assert [bernoulli(m) for m in range(5)] == [1, Fraction(-1, 2), Fraction(1, 6), 0, Fraction(-1, 30)]


def test_bch_low_degree_words():
    assert dict(bch_words(1)) == {(0,): 1, (1,): 1}
    # words are right-nested brackets, so [x, y] and [y, x] terms combine to 1/2 [x, y]
    w = dict(bch_words(2))
    assert w[(0, 1)] - w[(1, 0)] == Fraction(1, 2)
    w = dict(bch_words(3))
    assert w[(0, 0, 1)] - w[(0, 1, 0)] == Fraction(1, 12)


def test_group_requires_nilpotent(e2):
    with pytest.raises(NotNilpotent):
        group_of(e2)


def test_h3_product_closed_form(h3):
    G = group_of(h3)
    x = np.array([1.0, 2.0, 3.0])
    y = np.array([-0.5, 4.0, 1.0])
    want = x + y + 0.5 * h3.bracket(x, y)
    np.testing.assert_allclose(G.product(x, y), want, rtol=1e-14)


@settings(max_examples=80, deadline=None)
@given(coords, coords)
def test_bch_matches_matrix_exponentials(x, y):
    g, mats = upper_triangular(4)
    G = group_of(g)
    X, Y = to_matrix(mats, x), to_matrix(mats, y)
    Z = scipy.linalg.logm(scipy.linalg.expm(X) @ scipy.linalg.expm(Y)).real
    np.testing.assert_allclose(G.product(x, y), from_matrix(mats, Z), atol=1e-8 * (1 + np.abs(x).max() + np.abs(y).max()) ** 3)


@settings(max_examples=60, deadline=None)
@given(coords, coords, coords)
def test_group_axioms(x, y, z):
    g, _ = upper_triangular(4)
    G = group_of(g)
    s = 1 + max(np.abs(x).max(), np.abs(y).max(), np.abs(z).max())
    np.testing.assert_allclose(G.product(G.product(x, y), z), G.product(x, G.product(y, z)), atol=1e-10 * s**3)
    np.testing.assert_allclose(G.product(x, G.inverse(x)), 0, atol=1e-12 * s**2)
    np.testing.assert_array_equal(G.product(x, np.zeros(6)), x)
    np.testing.assert_allclose(G.product(0.3 * x, 0.7 * x), x, atol=1e-12 * s)


def test_product_is_batched(n4, rng):
    G = group_of(n4)
    x, y = rng.normal(size=(2, 7, 4))
    out = G.product(x, y)
    for i in range(7):
        np.testing.assert_allclose(out[i], G.product(x[i], y[i]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-1.5, 1.5)), arrays(np.float64, 4, elements=st.floats(-1.5, 1.5)))
def test_right_invariant_field_is_derivative(Z, x):
    G = group_of(n4_algebra())
    h = 1e-5
    fd = (G.product(h * Z, x) - G.product(-h * Z, x)) / (2 * h)
    np.testing.assert_allclose(G.right_invariant_field(Z, x), fd, atol=1e-6)


def test_automorphism_certificate(h3):
    GroupAutomorphism(h3, np.diag([2.0, 3.0, 6.0]))
    with pytest.raises(AutomorphismCertificateFailed):
        GroupAutomorphism(h3, np.diag([2.0, 3.0, 5.0]))
    assert GroupAutomorphism(h3, np.eye(3)).det_gap == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_automorphism_is_group_homomorphism(seed):
    g = n4_algebra()
    rng = np.random.default_rng(seed)
    Phi = random_automorphism(rng, g, derivation_basis(g))
    G = group_of(g)
    x, y = rng.normal(size=(2, 4))
    np.testing.assert_allclose(Phi(G.product(x, y)), G.product(Phi(x), Phi(y)), atol=1e-9 * (1 + np.abs(Phi.matrix).max()) ** 3)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["h3", "n4"]), st.integers(0, 2**32 - 1))
def test_f_phi_round_trip(name, seed):
    g = {"h3": h3_algebra, "n4": n4_algebra}[name]()
    rng = np.random.default_rng(seed)
    Phi = random_automorphism(rng, g, derivation_basis(g))
    x = rng.normal(size=g.dim) * 3
    np.testing.assert_allclose(f_phi_invert(g, Phi, f_phi_apply(g, Phi, x)), x, atol=1e-9)
    y = rng.normal(size=g.dim) * 3
    np.testing.assert_allclose(f_phi_apply(g, Phi, f_phi_invert(g, Phi, y)), y, atol=1e-9)


def test_f_phi_abelian_is_linear_solve(rng):
    g = LieAlgebra.abelian(3)
    M = rng.normal(size=(3, 3))
    y = rng.normal(size=3)
    np.testing.assert_allclose(f_phi_invert(g, M, y), np.linalg.solve(np.eye(3) - M, y), rtol=1e-12)


def test_f_phi_guard(h3):
    with pytest.raises(DetGapTooSmall):
        f_phi_invert(h3, np.diag([1.0, 2.0, 2.0]), np.ones(3))


def test_curve_inversion_scan(h3):
    ts = np.linspace(0.0, 1.0, 30)
    phis = [np.diag([2 + t, 3 + t, (2 + t) * (3 + t)]) for t in ts]
    ys = [np.array([t, 1.0, 0.0]) for t in ts]
    smooth = curve_invert(h3, phis, ys)
    assert smooth.continuous and not smooth.errors
    # a jump in the input is matched by the step size, so it is not flagged
    ys[15] = ys[15] + np.array([50.0, 0, 0])
    assert curve_invert(h3, phis, ys).continuous
    phis[3] = np.diag([1.0, 2.0, 2.0])
    assert 3 in curve_invert(h3, phis, ys).errors
