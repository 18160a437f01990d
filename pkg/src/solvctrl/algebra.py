"""Finite-dimensional Lie algebras given by structure constants.

An algebra is stored as a dense array ``c`` of shape ``(n, n, n)`` with
``[e_i, e_j] = sum_k c[i, j, k] e_k``.  Subspaces are carried as orthonormal
column bases.  All rank decisions use a singular-value threshold of
``TOL_RANK`` times the largest singular value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    JacobiViolation,
    NotAnIdeal,
    NotAntisymmetric,
    NotNilpotent,
    NotSolvable,
    TriangularizationFailed,
)
from .linalg import TOL_ALG, TOL_RANK, null_space, orth, rank

__all__ = [
    "LieAlgebra",
    "Subspace",
    "Quotient",
    "bracket",
    "center",
    "lower_central_series",
    "nilpotency_class",
    "derived_series",
    "is_solvable",
    "is_nilpotent",
    "nilradical",
    "quotient_algebra",
    "restrict",
    "bracket_saturate",
]


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Lie algebra over a fixed basis.

    Parameters
    ----------
    structure : array_like, shape (n, n, n)
        ``structure[i, j, k]`` is the coefficient of ``e_k`` in ``[e_i, e_j]``.
    labels : sequence of str, optional
        Basis names; defaults to ``e1 .. en``.
    exact : dict, optional
        Rational structure constants keyed by 0-based ``(i, j, k)`` with
        ``i < j``.  When present, the Jacobi identity is also checked in
        exact arithmetic.
    validate : bool
        Check antisymmetry and the Jacobi identity on construction.
    """

    structure: np.ndarray
    labels: tuple[str, ...] = ()
    exact: dict | None = field(default=None, repr=False)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        c = np.asarray(self.structure, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise DimensionMismatch(f"structure must have shape (n, n, n), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "structure", c)
        labels = tuple(self.labels) or tuple(f"e{i + 1}" for i in range(c.shape[0]))
        if len(labels) != c.shape[0]:
            raise DimensionMismatch("number of labels differs from dimension")
        object.__setattr__(self, "labels", labels)
        if self.validate:
            asym = float(np.max(np.abs(c + c.transpose(1, 0, 2)), initial=0.0))
            if asym > TOL_ALG * self.scale:
                raise NotAntisymmetric(f"c[i][j][k] + c[j][i][k] reaches {asym:.3e}", asym)
            res = self.jacobi_residual()
            if res > TOL_ALG * self.scale**2:
                raise JacobiViolation(f"Jacobi identity residual {res:.3e}", res)
            if self.exact is not None and not self.jacobi_exact():
                raise JacobiViolation("Jacobi identity fails in exact arithmetic", res)

    # construction ---------------------------------------------------------
    @classmethod
    def from_triples(
        cls,
        dim: int,
        triples: Iterable[Sequence],
        labels: Sequence[str] = (),
        one_based: bool = True,
    ) -> "LieAlgebra":
        """Build from nonzero constants ``(i, j, k, value)``; antisymmetry is implied."""
        c = np.zeros((dim, dim, dim))
        exact: dict | None = {}
        seen: dict = {}
        off = 1 if one_based else 0
        for t in triples:
            if len(t) != 4:
                raise DimensionMismatch(f"structure triple must be (i, j, k, value), got {t!r}")
            i, j, k = (int(t[0]) - off, int(t[1]) - off, int(t[2]) - off)
            if not all(0 <= a < dim for a in (i, j, k)):
                raise DimensionMismatch(f"index out of range in triple {t!r}")
            val = t[3]
            if i == j:
                if float(val) != 0.0:
                    raise NotAntisymmetric(f"[e{i + off}, e{i + off}] must vanish")
                continue
            sign = 1
            if i > j:
                i, j, sign = j, i, -1
            try:
                q = Fraction(str(val)) if isinstance(val, float) else Fraction(val)
            except (TypeError, ValueError) as exc:
                raise DimensionMismatch(f"structure constant {val!r} is not a number") from exc
            if exact is not None:
                exact[(i, j, k)] = sign * q
            v = sign * float(q)
            if (i, j, k) in seen and seen[(i, j, k)] != v:
                raise NotAntisymmetric(f"conflicting entries for [e{i + off}, e{j + off}] component {k + off}")
            seen[(i, j, k)] = v
            c[i, j, k] = v
            c[j, i, k] = -v
        return cls(c, tuple(labels), exact=exact)

    @classmethod
    def abelian(cls, dim: int, labels: Sequence[str] = ()) -> "LieAlgebra":
        return cls(np.zeros((dim, dim, dim)), tuple(labels), exact={})

    def to_triples(self, one_based: bool = True) -> list[tuple[int, int, int, float]]:
        off = 1 if one_based else 0
        out = []
        n = self.dim
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(n):
                    v = self.structure[i, j, k]
                    if v != 0.0:
                        out.append((i + off, j + off, k + off, float(v)))
        return out

    # basic properties -----------------------------------------------------
    @property
    def dim(self) -> int:
        return self.structure.shape[0]

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.structure), initial=0.0)))

    def bracket(self, a, b) -> np.ndarray:
        """``[a, b]``; leading batch dimensions broadcast."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape[-1] != self.dim or b.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"elements of length {a.shape[-1]} and {b.shape[-1]} in a {self.dim}-dimensional algebra"
            )
        return np.einsum("...i,...j,ijk->...k", a, b, self.structure)

    def ad(self, x) -> np.ndarray:
        """Matrix of ``y -> [x, y]`` (batched over leading dimensions)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"element of length {x.shape[-1]} in a {self.dim}-dimensional algebra")
        return np.einsum("...i,ijk->...kj", x, self.structure)

    @cached_property
    def ad_basis(self) -> np.ndarray:
        """Stack of ``ad(e_i)``, shape ``(n, n, n)``."""
        return self.ad(np.eye(self.dim))

    def jacobi_residual(self) -> float:
        c = self.structure
        if c.size == 0:
            return 0.0
        t1 = np.einsum("jlm,imk->ijlk", c, c)
        t2 = np.einsum("lim,jmk->ijlk", c, c)
        t3 = np.einsum("ijm,lmk->ijlk", c, c)
        return float(np.max(np.abs(t1 + t2 + t3)))

    def jacobi_exact(self) -> bool:
        if self.exact is None:
            return True
        n = self.dim
        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (i, j, k), v in self.exact.items():
            if v:
                table.setdefault((i, j), {})[k] = v
                table.setdefault((j, i), {})[k] = -v

        def br(a: dict[int, Fraction], b: dict[int, Fraction]) -> dict[int, Fraction]:
            out: dict[int, Fraction] = {}
            for i, ai in a.items():
                for j, bj in b.items():
                    for k, v in table.get((i, j), {}).items():
                        out[k] = out.get(k, Fraction(0)) + ai * bj * v
            return out

        for i in range(n):
            for j in range(i + 1, n):
                for l in range(j + 1, n):
                    ei, ej, el = {i: Fraction(1)}, {j: Fraction(1)}, {l: Fraction(1)}
                    total: dict[int, Fraction] = {}
                    for a, b, c in ((ei, ej, el), (ej, el, ei), (el, ei, ej)):
                        for k, v in br(a, br(b, c)).items():
                            total[k] = total.get(k, Fraction(0)) + v
                    if any(v != 0 for v in total.values()):
                        return False
        return True

    def same_table(self, other: "LieAlgebra", tol: float = TOL_ALG) -> bool:
        return self.dim == other.dim and bool(
            np.max(np.abs(self.structure - other.structure), initial=0.0) <= tol
        )

    # cached structural data -------------------------------------------------
    @cached_property
    def nilpotency_class(self) -> int | None:
        return nilpotency_class(self)

    @cached_property
    def is_abelian(self) -> bool:
        return bool(np.all(self.structure == 0.0)) or float(np.max(np.abs(self.structure))) <= TOL_ALG


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of ``R^n`` with an orthonormal column basis."""

    basis: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float).reshape(self.ambient_dim, -1)
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, vectors, ambient_dim: int, rtol: float = TOL_RANK) -> "Subspace":
        """Span of ``vectors`` given as rows (shape ``(k, n)``)."""
        V = np.asarray(vectors, dtype=float).reshape(-1, ambient_dim)
        if V.shape[0] == 0:
            return cls.zero(ambient_dim)
        return cls(orth(V.T, rtol=rtol), ambient_dim)

    @classmethod
    def from_columns(cls, M, rtol: float = TOL_RANK) -> "Subspace":
        M = np.asarray(M, dtype=float)
        if M.shape[1] == 0:
            return cls.zero(M.shape[0])
        return cls(orth(M, rtol=rtol), M.shape[0])

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)), n)

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n), n)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def orthonormalized(self) -> bool:
        return True

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        resid = v - self.basis @ (self.basis.T @ v)
        scale = max(1.0, float(np.max(np.abs(v), initial=0.0)))
        return bool(np.max(np.abs(resid), initial=0.0) <= tol * scale)

    def issubspace(self, other: "Subspace", tol: float = 1e-8) -> bool:
        return self.dim == 0 or other.contains(self.basis, tol)

    def equals(self, other: "Subspace", tol: float = 1e-8) -> bool:
        return self.dim == other.dim and self.issubspace(other, tol)

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace.from_columns(np.hstack([self.basis, other.basis]))

    def intersect(self, other: "Subspace") -> "Subspace":
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient_dim)
        K = null_space(np.hstack([self.basis, -other.basis]))
        if K.shape[1] == 0:
            return Subspace.zero(self.ambient_dim)
        return Subspace.from_columns(self.basis @ K[: self.dim])

    def complement(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        return Subspace(null_space(self.basis.T), self.ambient_dim)


@dataclass(frozen=True, eq=False)
class Quotient:
    """Quotient algebra ``g / ideal`` with its projection and section.

    ``projection`` (q x n) sends a vector of ``g`` to quotient coordinates;
    ``section`` (n x q) holds the complement basis vectors chosen from the
    standard basis, so ``projection @ section = I``.
    """

    algebra: LieAlgebra
    projection: np.ndarray
    section: np.ndarray
    ideal: Subspace

    def project(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.projection.T

    def lift(self, xhat) -> np.ndarray:
        """Minimum-norm preimage of ``xhat``."""
        return np.asarray(xhat, dtype=float) @ self.lift_matrix.T

    @cached_property
    def lift_matrix(self) -> np.ndarray:
        return np.linalg.pinv(self.projection)


# ---------------------------------------------------------------------------
# operations


def bracket(g: LieAlgebra, a, b) -> np.ndarray:
    return g.bracket(a, b)


def bracket_subspaces(g: LieAlgebra, A: Subspace, B: Subspace) -> Subspace:
    if A.dim == 0 or B.dim == 0:
        return Subspace.zero(g.dim)
    prods = g.bracket(A.basis.T[:, None, :], B.basis.T[None, :, :]).reshape(-1, g.dim)
    return Subspace.from_columns(prods.T)


def center(g: LieAlgebra) -> Subspace:
    """``{x : [x, e_i] = 0 for all i}``."""
    n = g.dim
    if n == 0:
        return Subspace.zero(0)
    stacked = g.ad_basis.reshape(n * n, n)
    return Subspace(null_space(stacked), n)


def lower_central_series(g: LieAlgebra) -> list[Subspace]:
    """``[g^1 = g, g^2 = [g, g], ...]`` up to the last nonzero term.

    For a non-nilpotent algebra the list ends at the term where the series
    stabilizes.
    """
    if g.dim == 0:
        return []
    full = Subspace.full(g.dim)
    series = [full]
    while True:
        nxt = bracket_subspaces(g, full, series[-1])
        if nxt.dim == 0 or nxt.dim == series[-1].dim:
            return series
        series.append(nxt)


def nilpotency_class(g: LieAlgebra) -> int | None:
    """Last index ``k`` with ``g^k != 0``; ``None`` if ``g`` is not nilpotent."""
    if g.dim == 0:
        return 0
    series = lower_central_series(g)
    if bracket_subspaces(g, Subspace.full(g.dim), series[-1]).dim != 0:
        return None
    return len(series)


def is_nilpotent(g: LieAlgebra) -> bool:
    return nilpotency_class(g) is not None


def derived_series(g: LieAlgebra) -> list[Subspace]:
    """``[g^(0) = g, g^(1) = [g, g], ...]`` ending with the zero subspace when solvable."""
    series = [Subspace.full(g.dim)]
    while series[-1].dim > 0:
        nxt = bracket_subspaces(g, series[-1], series[-1])
        if nxt.dim == series[-1].dim:
            break
        series.append(nxt)
    return series


def is_solvable(g: LieAlgebra) -> bool:
    return derived_series(g)[-1].dim == 0


def restrict(g: LieAlgebra, basis: np.ndarray, labels: Sequence[str] = ()) -> LieAlgebra:
    """Structure constants of the subalgebra spanned by the columns of ``basis``."""
    N = np.asarray(basis, dtype=float)
    p = N.shape[1]
    if p == 0:
        return LieAlgebra(np.zeros((0, 0, 0)))
    prods = g.bracket(N.T[:, None, :], N.T[None, :, :])  # (p, p, n)
    coords, *_ = np.linalg.lstsq(N, prods.reshape(-1, g.dim).T, rcond=None)
    resid = N @ coords - prods.reshape(-1, g.dim).T
    if np.max(np.abs(resid), initial=0.0) > 1e-8 * g.scale:
        raise NotAnIdeal("span is not closed under the bracket", "subalgebra")
    c = coords.T.reshape(p, p, p)
    c[np.abs(c) < 1e-14] = 0.0
    return LieAlgebra(c, tuple(labels))


def _check_ideal(g: LieAlgebra, ideal: Subspace, tol: float = 1e-8) -> float:
    if ideal.dim == 0:
        return 0.0
    prods = g.bracket(np.eye(g.dim)[:, None, :], ideal.basis.T[None, :, :]).reshape(-1, g.dim).T
    resid = prods - ideal.projector @ prods
    return float(np.max(np.abs(resid), initial=0.0))


def is_ideal(g: LieAlgebra, sub: Subspace, tol: float = 1e-8) -> bool:
    return _check_ideal(g, sub) <= tol * g.scale


def quotient_algebra(g: LieAlgebra, ideal: Subspace) -> Quotient:
    """Induced algebra on ``g / ideal``.

    The complement is spanned by standard basis vectors picked with pivoted
    QR against the ideal, so quotienting by ``{0}`` reproduces ``g``
    exactly.
    """
    res = _check_ideal(g, ideal)
    if res > 1e-8 * g.scale:
        raise NotAnIdeal(f"[g, I] leaves I by {res:.3e}")
    n = g.dim
    r = ideal.dim
    q = n - r
    if r == 0:
        piv = np.arange(n)
    else:
        perp = np.eye(n) - ideal.projector
        _, _, piv = scipy.linalg.qr(perp, pivoting=True)
        piv = np.sort(piv[:q])
    E = np.eye(n)[:, piv]
    T = np.linalg.inv(np.hstack([ideal.basis, E]))
    P = T[r:, :]
    P[np.abs(P) < 1e-15] = 0.0
    prods = g.bracket(E.T[:, None, :], E.T[None, :, :])  # (q, q, n)
    c = prods @ P.T
    c[np.abs(c) < 1e-14] = 0.0
    labels = tuple(g.labels[i] for i in piv)
    exact = None
    if g.exact is not None and r == 0:
        exact = dict(g.exact)
    qalg = LieAlgebra(c, labels, exact=exact)
    return Quotient(qalg, P, E, ideal)


def bracket_saturate(
    g: LieAlgebra,
    seed,
    extra_maps: Sequence[np.ndarray] = (),
    max_iter: int = 100,
) -> Subspace:
    """Smallest subspace containing ``seed`` closed under brackets and ``extra_maps``."""
    n = g.dim
    S = seed if isinstance(seed, Subspace) else Subspace.span(seed, n)
    for _ in range(max_iter):
        if S.dim == 0:
            return S
        cols = [S.basis, bracket_subspaces(g, S, S).basis]
        cols += [M @ S.basis for M in extra_maps]
        T = Subspace.from_columns(np.hstack(cols))
        if T.dim == S.dim:
            return S
        S = T
    return S


# ---------------------------------------------------------------------------
# nilradical via simultaneous triangularization


def _cluster_values(vals: np.ndarray, tol: float) -> list[np.ndarray]:
    """Single-linkage clusters of complex numbers; returns index arrays."""
    n = len(vals)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(v) for v in groups.values()]


def _common_eigenvector(
    mats: np.ndarray, derived_mats: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Common eigenvector of a solvable family of complex matrices.

    Weights of one-dimensional submodules vanish on the derived algebra, so
    the vector is searched inside the joint kernel of ``derived_mats``; that
    kernel is invariant and the family restricted to it commutes, which
    makes successive eigenspace restriction valid.
    """
    m = mats.shape[1]
    scale = max(1.0, float(np.max(np.abs(mats), initial=0.0)))
    if derived_mats.shape[0]:
        W = null_space(derived_mats.reshape(-1, m), rtol=TOL_RANK, atol=TOL_RANK * scale)
    else:
        W = np.eye(m, dtype=complex)
    if W.shape[1] == 0:
        raise TriangularizationFailed("derived algebra has no common kernel vector")
    W = W.astype(complex)
    for A in mats:
        R = W.conj().T @ A @ W
        vals = np.linalg.eigvals(R)
        clusters = _cluster_values(vals, 1e-5 * scale)
        pick = clusters[int(rng.integers(len(clusters)))]
        mu = vals[pick].mean()
        K = null_space(R - mu * np.eye(R.shape[0]), rtol=1e-8, atol=1e-8 * scale)
        if K.shape[1] == 0:
            raise TriangularizationFailed(f"no eigenvector for eigenvalue cluster near {mu:.3g}")
        W = W @ K
    for A in mats:
        AW = A @ W
        resid = AW - W @ (W.conj().T @ AW)
        if np.max(np.abs(resid), initial=0.0) > 1e-7 * scale:
            raise TriangularizationFailed("joint eigenspace is not invariant under the family")
    return W[:, 0] / np.linalg.norm(W[:, 0])


def _weights(g: LieAlgebra, rng: np.random.Generator) -> np.ndarray:
    """Diagonal weights ``lambda_i(e_j)`` of a triangular form of ``ad(g)``."""
    n = g.dim
    mats = g.ad_basis.astype(complex)
    D = derived_series(g)[1]
    weights = np.zeros((n, n), dtype=complex)
    for step in range(n):
        derived = np.einsum("jb,jkl->bkl", D.basis, mats) if D.dim else np.zeros((0,) + mats.shape[1:])
        v = _common_eigenvector(mats, derived, rng)
        weights[step] = np.einsum("k,jkl,l->j", v.conj(), mats, v)
        if step == n - 1:
            break
        Q = null_space(v.conj()[None, :])
        mats = np.einsum("ka,jkl,lb->jab", Q.conj(), mats, Q)
    return weights


def nilradical(
    g: LieAlgebra,
    candidate=None,
    rng_seed: int = 0,
) -> Subspace:
    """Largest nilpotent ideal of a solvable algebra.

    Computed as the common kernel of the diagonal weights of a simultaneous
    triangular form of ``ad(g)`` over the complexification.  A user-supplied
    ``candidate`` basis is accepted instead after checking that it is an
    ideal, is nilpotent and contains ``[g, g]``.
    """
    if not is_solvable(g):
        raise NotSolvable("derived series does not terminate at 0")
    n = g.dim
    if candidate is not None:
        N = Subspace.from_columns(np.asarray(candidate, dtype=float).reshape(n, -1))
        _verify_nilradical(g, N)
        return N
    if n == 0 or is_nilpotent(g):
        return Subspace.full(n)
    W = _weights(g, np.random.default_rng(rng_seed))
    M = np.vstack([W.real, W.imag])
    scale = max(1.0, float(np.max(np.abs(M))))
    N = Subspace(null_space(M, rtol=TOL_RANK, atol=1e-8 * scale), n)
    _verify_nilradical(g, N)
    return N


def _verify_nilradical(g: LieAlgebra, N: Subspace) -> None:
    if not is_ideal(g, N):
        raise NotAnIdeal("nilradical candidate is not an ideal", "ideal")
    D = derived_series(g)[1] if g.dim else Subspace.zero(0)
    if not D.issubspace(N):
        raise NotAnIdeal("nilradical candidate does not contain [g, g]", "contains [g,g]")
    if N.dim and not is_nilpotent(restrict(g, N.basis)):
        raise NotNilpotent("nilradical candidate is not nilpotent")
