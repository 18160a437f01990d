"""Small numerical linear-algebra helpers shared by every module."""

from __future__ import annotations

import numpy as np
import scipy.linalg

TOL_RANK = 1e-9
TOL_ALG = 1e-10


def _threshold(s: np.ndarray, rtol: float, atol: float) -> float:
    smax = s[0] if s.size else 0.0
    return max(rtol * smax, atol)


def rank(M: np.ndarray, rtol: float = TOL_RANK, atol: float = 1e-13) -> int:
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > _threshold(s, rtol, atol)))


def orth(M: np.ndarray, rtol: float = TOL_RANK, atol: float = 1e-13) -> np.ndarray:
    """Orthonormal basis (columns) for the column space of ``M``."""
    M = np.atleast_2d(np.asarray(M))
    n = M.shape[0]
    if M.size == 0:
        return np.zeros((n, 0), dtype=M.dtype)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > _threshold(s, rtol, atol)))
    return U[:, :r]


def null_space(M: np.ndarray, rtol: float = TOL_RANK, atol: float = 1e-13) -> np.ndarray:
    """Orthonormal basis (columns) for the kernel of ``M``."""
    M = np.atleast_2d(np.asarray(M))
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(ncols, dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > _threshold(s, rtol, atol)))
    return Vh[r:].conj().T


def smallest_singular_vectors(M: np.ndarray, k: int) -> np.ndarray:
    """Right singular vectors of the ``k`` smallest singular values."""
    if k == 0:
        return np.zeros((M.shape[1], 0), dtype=M.dtype)
    _, _, Vh = np.linalg.svd(M)
    return Vh[-k:].conj().T


def rref_basis(B: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Canonical basis of span(B): columns of the reduced row echelon form.

    Two bases of the same subspace give identical output, so subspaces that
    carry coordinates (generalized kernel, nilradical) get reproducible
    labels instead of an arbitrary orthonormal frame.
    """
    B = np.asarray(B, dtype=float)
    n, r = B.shape
    if r == 0:
        return B.copy()
    R = B.T.copy()
    pivot_row = 0
    for col in range(n):
        if pivot_row == r:
            break
        p = pivot_row + int(np.argmax(np.abs(R[pivot_row:, col])))
        if abs(R[p, col]) <= tol:
            continue
        R[[pivot_row, p]] = R[[p, pivot_row]]
        R[pivot_row] /= R[pivot_row, col]
        for i in range(r):
            if i != pivot_row:
                R[i] -= R[i, col] * R[pivot_row]
        pivot_row += 1
    R[np.abs(R) < tol] = 0.0
    return R[:pivot_row].T


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] != B.shape[1]:
        return np.array([np.pi / 2])
    if A.shape[1] == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(A, B)


def is_nilpotent_matrix(M: np.ndarray, rtol: float = 1e-9) -> bool:
    n = M.shape[0]
    if n == 0:
        return True
    scale = max(np.linalg.norm(M, 2), 1e-300)
    P = np.linalg.matrix_power(M / scale, n)
    return bool(np.linalg.norm(P, 2) <= rtol)


def nilpotent_expm_series(A: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(exp(tA), int_0^t exp(sA) ds)`` for a nilpotent matrix ``A``.

    Both series terminate after ``dim`` terms, so the result is exact up to
    roundoff.
    """
    n = A.shape[0]
    E = np.zeros((n, n))
    Ie = np.zeros((n, n))
    term = np.eye(n)
    fact = 1.0
    for k in range(n + 1):
        E += term * t**k / fact
        Ie += term * t ** (k + 1) / (fact * (k + 1))
        term = term @ A
        fact *= k + 1
    return E, Ie
