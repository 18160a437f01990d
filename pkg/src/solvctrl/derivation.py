"""Derivations, their additive Jordan decomposition and generalized kernels."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .algebra import LieAlgebra, Subspace, bracket_subspaces, nilradical, is_solvable
from .errors import ClusteringAmbiguous, DimensionMismatch, NotADerivation, NotElliptic, NotSolvable
from .linalg import TOL_ALG, TOL_RANK, null_space, principal_angles, smallest_singular_vectors

__all__ = [
    "Derivation",
    "JordanParts",
    "LeibnizReport",
    "leibniz_check",
    "derivation_basis",
    "jordan_decomposition",
    "check_jordan_parts",
    "generalized_kernel",
    "generalized_kernel_report",
    "KernelSplit",
    "kernel_split",
    "CompactnessVerdict",
    "n0_compactness_criterion",
    "elliptic_recurrence",
]


@dataclass(frozen=True)
class LeibnizReport:
    residual: float
    worst_pair: tuple[int, int] | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def leibniz_check(D, g: LieAlgebra, tol: float = TOL_ALG) -> LeibnizReport:
    """Max over basis pairs of ``|D[x,y] - [Dx,y] - [x,Dy]|``.

    The tolerance is scaled by ``max(1, |D|) * max(1, |c|)``.
    """
    D = np.asarray(D, dtype=float)
    n = g.dim
    if D.shape != (n, n):
        raise DimensionMismatch(f"derivation of shape {D.shape} on a {n}-dimensional algebra")
    if n == 0:
        return LeibnizReport(0.0, None, tol)
    c = g.structure
    # Columns of D are images of basis vectors: D e_i = D[:, i].
    lhs = np.einsum("ijm,km->ijk", c, D)
    t2 = np.einsum("ai,ajk->ijk", D, c)
    t3 = np.einsum("bj,ibk->ijk", D, c)
    R = np.linalg.norm(lhs - t2 - t3, axis=-1)
    idx = np.unravel_index(int(np.argmax(R)), R.shape)
    scale = max(1.0, float(np.max(np.abs(D)))) * g.scale
    return LeibnizReport(float(R[idx]), (int(idx[0]), int(idx[1])), tol * scale)


def derivation_basis(g: LieAlgebra) -> np.ndarray:
    """Basis of ``Der(g)``, shape ``(k, n, n)``; each element passes ``leibniz_check``."""
    n = g.dim
    rows = []
    for a in range(n):
        for b in range(n):
            E = np.zeros((n, n))
            E[a, b] = 1.0
            c = g.structure
            lhs = np.einsum("ijm,km->ijk", c, E)
            t2 = np.einsum("ai,ajk->ijk", E, c)
            t3 = np.einsum("bj,ibk->ijk", E, c)
            rows.append((lhs - t2 - t3).ravel())
    M = np.array(rows).T
    K = null_space(M)
    basis = K.T.reshape(-1, n, n)
    for B in basis:
        if not leibniz_check(B, g).passed:
            raise NotADerivation("derivation basis element failed the Leibniz check")
    return basis


@dataclass(frozen=True, eq=False)
class Derivation:
    """Derivation ``matrix`` of ``algebra`` (columns are images of basis vectors)."""

    algebra: LieAlgebra
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)
        if self.check:
            rep = leibniz_check(M, self.algebra)
            if not rep.passed:
                i, j = rep.worst_pair
                raise NotADerivation(
                    f"Leibniz residual {rep.residual:.3e} on pair (e{i + 1}, e{j + 1})", rep.residual
                )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T


@dataclass(frozen=True, eq=False)
class JordanParts:
    H: np.ndarray
    E: np.ndarray
    N: np.ndarray
    eigenvalues: np.ndarray  # one representative per generalized eigenspace
    multiplicities: np.ndarray

    @property
    def semisimple(self) -> np.ndarray:
        return self.H + self.E


def _cluster(vals: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(vals.real + 1e-3 * vals.imag)
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
    for i in order:
        groups.setdefault(find(int(i)), []).append(int(i))
    return list(groups.values())


def _nullity_ok(M: np.ndarray, mu: complex, m: int, scale: float) -> bool:
    """Does ``(M - mu)^m`` have an ``m``-dimensional numerical kernel?"""
    n = M.shape[0]
    P = np.linalg.matrix_power((M - mu * np.eye(n)) / scale, m)
    s = np.linalg.svd(P, compute_uv=False)
    return bool(s[n - m] <= 1e-10)


def _spectral_clusters(M: np.ndarray, tol_eig: float) -> list[tuple[complex, int]]:
    """Eigenvalue clusters ``(mean, multiplicity)``.

    Eigenvalues within ``tol_eig`` are grouped.  Clusters a little farther
    apart are merged only when the merged mean has a generalized eigenspace
    of the merged dimension (the perturbed spectrum of a Jordan block);
    otherwise two clusters closer than ``10 * tol_eig`` are reported as
    ambiguous.
    """
    vals = np.linalg.eigvals(M)
    scale = max(float(np.linalg.norm(M, 2)), 1e-300)
    clusters = [list(c) for c in _cluster(vals, tol_eig)]
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        means = [vals[c].mean() for c in clusters]
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = abs(means[a] - means[b])
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        if d > 1e-3 * scale:
            break
        joined = clusters[a] + clusters[b]
        mu = vals[joined].mean()
        if _nullity_ok(M, mu, len(joined), scale):
            clusters[a] = joined
            del clusters[b]
            merged = True
        elif d < 10 * tol_eig:
            raise ClusteringAmbiguous(
                f"eigenvalue clusters {means[a]:.6g} and {means[b]:.6g} are {d:.2e} apart", d
            )
    out = []
    for c in clusters:
        mu = complex(vals[c].mean())
        if abs(mu.imag) <= tol_eig:
            mu = complex(mu.real, 0.0)
        if abs(mu.real) <= tol_eig:
            mu = complex(0.0, mu.imag)
        out.append((mu, len(c)))
    return out


def jordan_decomposition(D, tol_eig: float | None = None) -> JordanParts:
    """Additive Jordan decomposition ``D = H + E + N``.

    On the generalized eigenspace of an eigenvalue ``a + ib``, ``H`` acts by
    ``a``, ``E`` by ``ib`` and ``N`` is the remainder.  The spaces are the
    kernels of ``(D - mu)^m`` with ``m`` the cluster multiplicity; the
    output is realified.
    """
    M = D.matrix if isinstance(D, Derivation) else np.asarray(D, dtype=float)
    n = M.shape[0]
    normD = float(np.linalg.norm(M, 2)) if n else 0.0
    if n == 0 or normD == 0.0:
        Z = np.zeros((n, n))
        return JordanParts(Z, Z.copy(), M.copy(), np.zeros(1 if n else 0, complex), np.array([n] if n else []))
    if tol_eig is None:
        tol_eig = 1e-7 * normD
    clusters = _spectral_clusters(M, tol_eig)
    blocks = []
    re_diag = []
    im_diag = []
    for mu, m in clusters:
        P = np.linalg.matrix_power((M - mu * np.eye(n)) / normD, m)
        V = smallest_singular_vectors(P, m)
        blocks.append(V)
        re_diag += [mu.real] * m
        im_diag += [mu.imag] * m
    V = np.hstack(blocks)
    Vinv = np.linalg.inv(V)
    H = (V * np.array(re_diag)) @ Vinv
    E = (V * (1j * np.array(im_diag))) @ Vinv
    imag_leak = max(float(np.max(np.abs(H.imag))), float(np.max(np.abs(E.imag))))
    if imag_leak > 1e-8 * normD:
        raise ClusteringAmbiguous(f"realification left an imaginary part {imag_leak:.2e}", imag_leak)
    H = H.real
    E = E.real
    N = M - H - E
    return JordanParts(
        H, E, N, np.array([c[0] for c in clusters]), np.array([c[1] for c in clusters])
    )


def _squarefree_residual(M: np.ndarray, roots: list[complex], scale: float) -> float:
    n = M.shape[0]
    P = np.eye(n, dtype=complex)
    for r in roots:
        P = P @ ((M - r * np.eye(n)) / scale)
    return float(np.max(np.abs(P), initial=0.0))


def _distinct(vals: np.ndarray, tol: float) -> list[complex]:
    return [complex(vals[c].mean()) for c in _cluster(vals, tol)]


def check_jordan_parts(D, parts: JordanParts, g: LieAlgebra | None = None, rtol: float = 1e-9) -> dict:
    """Residuals of every invariant of a Jordan decomposition (relative to ``|D|``)."""
    M = D.matrix if isinstance(D, Derivation) else np.asarray(D, dtype=float)
    n = M.shape[0]
    normD = float(np.linalg.norm(M, 2)) if n else 0.0
    if normD == 0.0:
        normD = 1.0
    H, E, N = parts.H, parts.E, parts.N
    rep = {}
    rep["reconstruction"] = float(np.linalg.norm(H + E + N - M, 2)) / normD
    comm = 0.0
    for A, B in ((H, E), (H, N), (E, N), (M, H), (M, E)):
        comm = max(comm, float(np.linalg.norm(A @ B - B @ A, 2)))
    rep["commutators"] = comm / normD**2
    ev_H = np.linalg.eigvals(H)
    ev_E = np.linalg.eigvals(E)
    rep["H_real_spectrum"] = float(np.max(np.abs(ev_H.imag), initial=0.0)) / normD
    rep["E_imaginary_spectrum"] = float(np.max(np.abs(ev_E.real), initial=0.0)) / normD
    tol = 1e-6 * normD
    rH = _distinct(ev_H, tol)
    rE = _distinct(ev_E, tol)
    rep["H_semisimple"] = _squarefree_residual(H, rH, normD)
    rep["E_semisimple"] = _squarefree_residual(E, rE, normD)
    rep["N_nilpotent"] = float(np.linalg.norm(np.linalg.matrix_power(N / normD, n), 2)) if n else 0.0
    if g is not None:
        for name, P in (("H", H), ("E", E), ("N", N)):
            lr = leibniz_check(P, g)
            rep[f"leibniz_{name}"] = lr.residual / max(1.0, normD) / g.scale
    rep["passed"] = all(v <= rtol for k, v in rep.items() if k != "passed")
    return rep


def generalized_kernel(D, parts: JordanParts | None = None) -> Subspace:
    """Generalized kernel of ``D`` (sum of generalized eigenspaces of 0)."""
    return generalized_kernel_report(D, parts)["subspace"]


def generalized_kernel_report(D, parts: JordanParts | None = None) -> dict:
    """Generalized kernel computed twice: from ``D^dim`` and from ``ker(H + E)``.

    The dimension is the size of the zero eigenvalue cluster; the two
    routes are compared by principal angles.
    """
    M = D.matrix if isinstance(D, Derivation) else np.asarray(D, dtype=float)
    n = M.shape[0]
    if n == 0:
        return {"subspace": Subspace.zero(0), "dim": 0, "max_angle": 0.0, "agree": True}
    normD = float(np.linalg.norm(M, 2))
    if normD == 0.0:
        return {"subspace": Subspace.full(n), "dim": n, "max_angle": 0.0, "agree": True}
    if parts is None:
        parts = jordan_decomposition(M)
    m0 = int(sum(m for mu, m in zip(parts.eigenvalues, parts.multiplicities) if mu == 0))
    K1 = smallest_singular_vectors(np.linalg.matrix_power(M / normD, n), m0)
    K2 = smallest_singular_vectors((parts.H + parts.E) / normD, m0)
    ang = principal_angles(K1, K2)
    max_angle = float(np.max(ang, initial=0.0))
    return {
        "subspace": Subspace(K1, n),
        "dim": m0,
        "max_angle": max_angle,
        "agree": max_angle <= 1e-8,
        "via_H_plus_E": Subspace(K2, n),
    }


@dataclass(frozen=True, eq=False)
class KernelSplit:
    g0: Subspace
    n: Subspace
    n0: Subspace
    sum_is_everything: bool
    g0_bracket_in_n0: bool
    dims: dict

    def as_dict(self) -> dict:
        return {
            "dim_g": self.n.ambient_dim,
            "dim_g0": self.g0.dim,
            "dim_n": self.n.dim,
            "dim_n0": self.n0.dim,
            "n_plus_g0_is_g": self.sum_is_everything,
            "g0_bracket_in_n0": self.g0_bracket_in_n0,
        }


def kernel_split(g: LieAlgebra, D, nilradical_basis=None) -> KernelSplit:
    """Generalized kernel ``g0``, nilradical ``n`` and ``n0 = n ∩ g0``.

    Also reports ``dim(n + g0) == dim g`` and whether ``[g0, g0]`` lies in ``n0``.
    """
    if not is_solvable(g):
        raise NotSolvable("derived series does not terminate at 0")
    M = D.matrix if isinstance(D, Derivation) else np.asarray(D, dtype=float)
    n_sub = nilradical(g, candidate=nilradical_basis)
    g0 = generalized_kernel(M)
    n0 = n_sub.intersect(g0)
    total = (n_sub + g0).dim
    br = bracket_subspaces(g, g0, g0)
    return KernelSplit(
        g0=g0,
        n=n_sub,
        n0=n0,
        sum_is_everything=total == g.dim,
        g0_bracket_in_n0=br.issubspace(n0),
        dims={"g": g.dim, "g0": g0.dim, "n": n_sub.dim, "n0": n0.dim},
    )


class CompactnessVerdict(str, Enum):
    COMPACT = "COMPACT"
    NOT_COMPACT_IN_MODEL = "NOT_COMPACT_IN_MODEL"


def n0_compactness_criterion(n0: Subspace | int) -> tuple[CompactnessVerdict, str]:
    """In a simply connected model the connected subgroup ``N0`` is compact iff trivial."""
    d = n0 if isinstance(n0, int) else n0.dim
    if d == 0:
        return CompactnessVerdict.COMPACT, "n0 = 0, so N0 is the trivial subgroup"
    return (
        CompactnessVerdict.NOT_COMPACT_IN_MODEL,
        f"dim n0 = {d}: a nontrivial connected subgroup of a simply connected nilpotent group "
        "is a copy of R^k, never compact; torus quotients are not modelled",
    )


def _check_elliptic(E: np.ndarray) -> None:
    n = E.shape[0]
    if n == 0:
        return
    normE = float(np.linalg.norm(E, 2))
    if normE == 0.0:
        return
    vals = np.linalg.eigvals(E)
    if np.max(np.abs(vals.real)) > 1e-7 * normE:
        raise NotElliptic("spectrum is not purely imaginary")
    roots = _distinct(vals, 1e-6 * normE)
    if _squarefree_residual(E, roots, normE) > 1e-7:
        raise NotElliptic("matrix is not semisimple")


def elliptic_recurrence(D_E, g0, S0: float, eps: float, nmax: int = 100000) -> int | None:
    """Smallest ``1 <= n <= nmax`` with ``|exp(n S0 D_E) g - g| < eps``; ``None`` if absent."""
    E = D_E.matrix if isinstance(D_E, Derivation) else np.asarray(D_E, dtype=float)
    _check_elliptic(E)
    g0 = np.asarray(g0, dtype=float)
    step = scipy.linalg.expm(S0 * E)
    x = g0.copy()
    for k in range(1, nmax + 1):
        x = step @ x
        if np.linalg.norm(x - g0) < eps:
            return k
    return None
