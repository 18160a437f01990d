import numpy as np
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from solvctrl.linalg import (
    is_nilpotent_matrix,
    nilpotent_expm_series,
    null_space,
    principal_angles,
    rank,
    rref_basis,
)


def test_rank_and_null_space():
    M = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    assert rank(M) == 1
    K = null_space(M)
    assert K.shape == (3, 2)
    np.testing.assert_allclose(M @ K, 0, atol=1e-12)


def test_rref_basis_is_canonical():
    B = np.array([[1.0, 1.0], [0.0, 2.0], [0.0, 0.0]])
    np.testing.assert_allclose(rref_basis(B), np.eye(3)[:, :2], atol=1e-12)
    np.testing.assert_allclose(rref_basis(B @ np.array([[2.0, 1.0], [1.0, 3.0]])), np.eye(3)[:, :2], atol=1e-12)


def test_principal_angles():
    a = np.eye(3)[:, :1]
    b = np.array([[1.0], [1.0], [0.0]]) / np.sqrt(2)
    np.testing.assert_allclose(principal_angles(a, b), [np.pi / 4])


def test_nilpotency():
    assert is_nilpotent_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert not is_nilpotent_matrix(np.eye(2))
    assert is_nilpotent_matrix(np.zeros((0, 0)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.floats(0.0, 3.0), st.integers(0, 2**32 - 1))
def test_nilpotent_series_matches_expm(n, t, seed):
    A = np.triu(np.random.default_rng(seed).normal(size=(n, n)), 1)
    E, I = nilpotent_expm_series(A, t)
    np.testing.assert_allclose(E, scipy.linalg.expm(t * A), atol=1e-12)
    # integral of exp(sA) over [0, t] through the augmented exponential
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    np.testing.assert_allclose(I, scipy.linalg.expm(t * aug)[:n, n:], atol=1e-11)
