"""Simply connected nilpotent groups in exponential coordinates.

A point of the group is a coefficient vector of the Lie algebra; the
product is the Baker-Campbell-Hausdorff series, which terminates at the
nilpotency class.  The series is generated once per degree in Dynkin's
form with exact rational coefficients.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .algebra import LieAlgebra, center, quotient_algebra
from .errors import (
    AutomorphismCertificateFailed,
    DetGapTooSmall,
    DimensionMismatch,
    NotNilpotent,
    ResidualNotCentral,
    SolvctrlError,
)
from .linalg import TOL_ALG

__all__ = [
    "NilpotentGroup",
    "GroupAutomorphism",
    "group_of",
    "bch_words",
    "bernoulli",
    "bch_product",
    "group_inverse",
    "right_invariant_field",
    "f_phi_apply",
    "f_phi_invert",
    "curve_invert",
    "CurveInversion",
    "tol_det",
]

X, Y = 0, 1


@lru_cache(maxsize=None)
def bernoulli(m: int) -> Fraction:
    """Bernoulli number with ``B_1 = -1/2``."""
    if m == 0:
        return Fraction(1)
    return -sum(comb(m + 1, k) * bernoulli(k) for k in range(m)) / (m + 1)


def _pair_sequences(total: int, n: int):
    """Sequences of ``n`` pairs ``(r, s)`` with ``r + s >= 1`` summing to ``total``."""
    if n == 0:
        if total == 0:
            yield ()
        return
    for d in range(1, total - (n - 1) + 1):
        for r in range(d + 1):
            for rest in _pair_sequences(total - d, n - 1):
                yield ((r, d - r),) + rest


@lru_cache(maxsize=None)
def bch_words(degree: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Dynkin terms of ``log(e^x e^y)`` of total degree ``degree``.

    Each entry is ``(word, coefficient)`` where the word is read as the
    right-nested bracket ``[w1, [w2, [..., w_last]]]`` of letters 0 (x) and
    1 (y).  Words ending in a repeated letter vanish and are dropped.
    """
    acc: dict[tuple[int, ...], Fraction] = {}
    for n in range(1, degree + 1):
        sign = Fraction((-1) ** (n - 1), n)
        for seq in _pair_sequences(degree, n):
            denom = degree
            word: list[int] = []
            for r, s in seq:
                denom *= factorial(r) * factorial(s)
                word += [X] * r + [Y] * s
            if len(word) >= 2 and word[-1] == word[-2]:
                continue
            w = tuple(word)
            acc[w] = acc.get(w, Fraction(0)) + sign / denom
    return tuple((w, c) for w, c in sorted(acc.items()) if c != 0)


class NilpotentGroup:
    """Group ``(n, *)`` on a nilpotent algebra."""

    def __init__(self, algebra: LieAlgebra):
        k = algebra.nilpotency_class
        if k is None:
            raise NotNilpotent("the lower central series does not reach 0")
        self.algebra = algebra
        self.nclass = k
        terms = []
        for d in range(1, k + 1):
            terms += [(w, float(c)) for w, c in bch_words(d)]
        self._terms = tuple(terms)
        self._field_coeffs = tuple(float(bernoulli(j) / factorial(j)) for j in range(max(k, 1)))

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def _check(self, *vs):
        for v in vs:
            if v.shape[-1] != self.dim:
                raise DimensionMismatch(f"point of length {v.shape[-1]} in a {self.dim}-dimensional group")

    def product(self, x, y) -> np.ndarray:
        """``x * y`` (batched over leading dimensions)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check(x, y)
        if self.nclass <= 1:
            return x + y
        x, y = np.broadcast_arrays(x, y)
        letters = (x, y)
        memo: dict[tuple[int, ...], np.ndarray] = {}
        br = self.algebra.bracket

        def value(word):
            if len(word) == 1:
                return letters[word[0]]
            v = memo.get(word)
            if v is None:
                v = br(letters[word[0]], value(word[1:]))
                memo[word] = v
            return v

        out = np.zeros_like(x)
        for w, c in self._terms:
            out = out + c * value(w)
        return out

    def inverse(self, x) -> np.ndarray:
        return -np.asarray(x, dtype=float)

    def right_invariant_field(self, Z, x) -> np.ndarray:
        """``d/ds (sZ) * x`` at ``s = 0``, as ``sum_j B_j / j! ad(x)^j Z``."""
        Z = np.asarray(Z, dtype=float)
        x = np.asarray(x, dtype=float)
        self._check(Z, x)
        Z, x = np.broadcast_arrays(Z, x)
        out = Z * self._field_coeffs[0]
        term = Z
        for c in self._field_coeffs[1:]:
            term = self.algebra.bracket(x, term)
            if c != 0.0:
                out = out + c * term
        return out


_groups: "weakref.WeakKeyDictionary[LieAlgebra, NilpotentGroup]" = weakref.WeakKeyDictionary()


def group_of(g: LieAlgebra) -> NilpotentGroup:
    """Cached group structure of a nilpotent algebra."""
    G = _groups.get(g)
    if G is None:
        G = NilpotentGroup(g)
        _groups[g] = G
    return G


def bch_product(g: LieAlgebra, x, y) -> np.ndarray:
    return group_of(g).product(x, y)


def group_inverse(x) -> np.ndarray:
    return -np.asarray(x, dtype=float)


def right_invariant_field(g: LieAlgebra, Z, x) -> np.ndarray:
    return group_of(g).right_invariant_field(Z, x)


def tol_det(M: np.ndarray) -> float:
    return 1e-8 * (1.0 + float(np.linalg.norm(M, 2)))


@dataclass(frozen=True, eq=False)
class GroupAutomorphism:
    """Automorphism of a nilpotent algebra (equivalently of its group).

    With ``certify=True`` the bracket-preservation residual
    ``max |M[e_i, e_j] - [M e_i, M e_j]|`` relative to ``max(1, |M|)^2`` is
    checked against ``tol``.
    """

    algebra: LieAlgebra
    matrix: np.ndarray
    certify: bool = True
    tol: float = 1e-9
    residual: float = field(default=0.0, init=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        n = self.algebra.dim
        if M.shape != (n, n):
            raise DimensionMismatch(f"automorphism of shape {M.shape} on a {n}-dimensional algebra")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        res = self.bracket_residual()
        object.__setattr__(self, "residual", res)
        if self.certify:
            if res > self.tol:
                raise AutomorphismCertificateFailed(f"relative bracket residual {res:.3e}", res)
            if n and abs(np.linalg.det(M)) == 0.0:
                raise AutomorphismCertificateFailed("singular matrix", 0.0)

    def bracket_residual(self) -> float:
        g = self.algebra
        M = self.matrix
        n = g.dim
        if n == 0:
            return 0.0
        I = np.eye(n)
        lhs = g.bracket(I[:, None, :], I[None, :, :]) @ M.T
        Me = I @ M.T
        rhs = g.bracket(Me[:, None, :], Me[None, :, :])
        scale = max(1.0, float(np.linalg.norm(M, 2))) ** 2 * g.scale
        return float(np.max(np.abs(lhs - rhs))) / scale

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T

    @property
    def det_gap(self) -> float:
        n = self.algebra.dim
        return abs(float(np.linalg.det(np.eye(n) - self.matrix))) if n else 1.0


def _as_matrix(phi) -> np.ndarray:
    return phi.matrix if isinstance(phi, GroupAutomorphism) else np.asarray(phi, dtype=float)


def f_phi_apply(g: LieAlgebra, phi, x) -> np.ndarray:
    """``f_phi(x) = x * phi(x)^-1``."""
    M = _as_matrix(phi)
    x = np.asarray(x, dtype=float)
    return group_of(g).product(x, -(x @ M.T))


def f_phi_invert(g: LieAlgebra, phi, y, check: bool = True) -> np.ndarray:
    """The unique ``x`` with ``f_phi(x) = y``.

    Solved layer by layer along the center: invert on ``g / z(g)``, lift,
    then correct by a central element found from a linear solve on the
    center.
    """
    M = _as_matrix(phi)
    y = np.asarray(y, dtype=float)
    n = g.dim
    if y.shape != (n,):
        raise DimensionMismatch(f"point of length {y.shape} in a {n}-dimensional group")
    if n == 0:
        return y.copy()
    gap = abs(float(np.linalg.det(np.eye(n) - M)))
    if gap <= tol_det(M):
        raise DetGapTooSmall(f"|det(I - phi)| = {gap:.3e} is below {tol_det(M):.3e}", None)
    x = _invert(g, M, y)
    if check:
        back = f_phi_apply(g, M, x)
        err = float(np.linalg.norm(back - y))
        if err > 1e-8 * (1.0 + float(np.linalg.norm(y))) * (1.0 + float(np.linalg.norm(x))):
            raise ResidualNotCentral(f"round-trip residual {err:.3e}", err)
    return x


def _invert(g: LieAlgebra, M: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = g.dim
    if g.is_abelian:
        return np.linalg.solve(np.eye(n) - M, y)
    z = center(g)
    B = z.basis
    Q = quotient_algebra(g, z)
    Mhat = Q.projection @ M @ Q.section
    xhat = _invert(Q.algebra, Mhat, Q.project(y))
    x1 = Q.lift(xhat)
    G = group_of(g)
    r = G.product(-f_phi_apply(g, M, x1), y)
    off = r - z.projector @ r
    tol = TOL_ALG * g.scale * (1.0 + float(np.linalg.norm(y))) * (1.0 + float(np.linalg.norm(x1))) ** max(G.nclass, 1)
    if float(np.max(np.abs(off))) > max(tol, 1e-9 * (1.0 + float(np.linalg.norm(r)))):
        raise ResidualNotCentral(f"residual leaves the center by {float(np.max(np.abs(off))):.3e}")
    Mz = B.T @ M @ B
    w = B @ np.linalg.solve(np.eye(B.shape[1]) - Mz, B.T @ r)
    return x1 + w  # w is central, so x1 * w = x1 + w


@dataclass
class CurveInversion:
    points: list  # inverse per sample, or None where the sample failed
    errors: dict  # index -> error message
    jumps: np.ndarray
    lipschitz: float
    continuous: bool


def curve_invert(g: LieAlgebra, phis, ys) -> CurveInversion:
    """Pointwise inversion along a sampled curve with a continuity scan.

    ``lipschitz`` is ten times the median ratio of output step to input
    step; the curve is flagged discontinuous if any step exceeds it.
    """
    pts: list = []
    errs: dict = {}
    mats = [_as_matrix(p) for p in phis]
    ys = [np.asarray(y, dtype=float) for y in ys]
    for i, (M, y) in enumerate(zip(mats, ys)):
        try:
            pts.append(f_phi_invert(g, M, y))
        except SolvctrlError as e:
            pts.append(None)
            errs[i] = str(e)
    ratios = []
    for i in range(1, len(pts)):
        if pts[i] is None or pts[i - 1] is None:
            continue
        din = float(np.linalg.norm(mats[i] - mats[i - 1]) + np.linalg.norm(ys[i] - ys[i - 1]))
        dout = float(np.linalg.norm(pts[i] - pts[i - 1]))
        ratios.append(dout / din if din > 0 else (0.0 if dout == 0 else np.inf))
    jumps = np.array(ratios)
    if jumps.size:
        L = 10.0 * float(np.median(jumps)) + 1e-12
        cont = bool(np.all(jumps <= L))
    else:
        L, cont = 0.0, True
    return CurveInversion(pts, errs, jumps, L, cont)
