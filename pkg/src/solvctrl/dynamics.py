"""Control laws, automorphism flows and solutions of the systems on ``V x n``.

The inner system on a nilpotent group ``(n, *)`` reads

    x' = D(u) x + sum_j u_j Z_j(x),     D(u) = D0 + sign * sum_j u_j D_j,

with right-invariant fields ``Z_j``.  A product system adds a vector
component ``v' = A v + sum_j u_j b_j`` with ``A`` nilpotent.  Controls are
piecewise constant with values in a box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .algebra import LieAlgebra, restrict
from .derivation import kernel_split, leibniz_check
from .errors import (
    ANotNilpotent,
    ControlOutOfRange,
    D0Singular,
    DimensionMismatch,
    N0NotTrivial,
    NotADerivation,
    StepSizeUnderflow,
)
from .linalg import is_nilpotent_matrix, nilpotent_expm_series, rref_basis
from .nilgroup import GroupAutomorphism, group_of

__all__ = [
    "ControlRange",
    "ControlLaw",
    "SigmaASystem",
    "ProductSystem",
    "SemidirectLCS",
    "TimeMap",
    "flow_B",
    "solve_A_from_identity",
    "solve_A",
    "solve_A_direct",
    "solve_product",
    "solve_product_direct",
    "trajectory",
    "build_semidirect",
    "semidirect_group_law",
    "semidirect_field_check",
    "rescale_control",
    "solve_rescaled",
    "simulate_batch",
]


# ---------------------------------------------------------------------------
# controls


@dataclass(frozen=True)
class ControlRange:
    """Box ``prod_j [-radii_j, radii_j]``; every radius positive."""

    radii: tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(x) for x in self.radii)
        if any(not np.isfinite(x) or x <= 0 for x in r):
            raise ControlOutOfRange(f"control radii must be positive, got {r}")
        object.__setattr__(self, "radii", r)

    @property
    def m(self) -> int:
        return len(self.radii)

    def contains(self, values, slack: float = 1e-12) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(np.abs(v) <= np.asarray(self.radii) * (1 + slack)))

    def clip(self, values) -> np.ndarray:
        r = np.asarray(self.radii)
        return np.clip(values, -r, r)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        r = np.asarray(self.radii)
        shape = (size,) if isinstance(size, int) else tuple(size)
        return rng.uniform(-1.0, 1.0, size=shape + (self.m,)) * r


class ControlLaw:
    """Piecewise-constant control: ``durations[i]`` seconds at ``values[i]``."""

    __slots__ = ("durations", "values")

    def __init__(self, durations, values, m: int | None = None):
        d = np.array(durations, dtype=float).reshape(-1)
        v = np.array(values, dtype=float)
        if v.size == 0:
            v = v.reshape(0, m if m is not None else 0)
        if v.ndim == 1:
            v = v.reshape(len(d), -1)
        if v.shape[0] != d.shape[0]:
            raise DimensionMismatch(f"{d.shape[0]} durations but {v.shape[0]} values")
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ControlOutOfRange("durations must be positive and finite")
        d.setflags(write=False)
        v.setflags(write=False)
        self.durations = d
        self.values = v

    @classmethod
    def constant(cls, value, duration: float) -> "ControlLaw":
        return cls([duration], [list(np.atleast_1d(value))])

    @classmethod
    def zero(cls, m: int, duration: float) -> "ControlLaw":
        return cls([duration], np.zeros((1, m)))

    @classmethod
    def empty(cls, m: int) -> "ControlLaw":
        return cls([], np.zeros((0, m)))

    @property
    def n_pieces(self) -> int:
        return len(self.durations)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    def then(self, other: "ControlLaw") -> "ControlLaw":
        """Run ``self`` first, then ``other``."""
        return ControlLaw(
            np.concatenate([self.durations, other.durations]),
            np.vstack([self.values.reshape(-1, other.m), other.values]),
        )

    def reversed(self) -> "ControlLaw":
        return ControlLaw(self.durations[::-1], self.values[::-1], m=self.m)

    def truncated(self, t: float) -> "ControlLaw":
        """Restriction to ``[0, t]``."""
        ends = np.cumsum(self.durations)
        d = []
        v = []
        start = 0.0
        for dur, val, end in zip(self.durations, self.values, ends):
            if start >= t:
                break
            if min(end, t) - start > 1e-12:
                d.append(min(end, t) - start)
                v.append(val)
            start = end
        return ControlLaw(d, np.array(v).reshape(-1, self.m), m=self.m)

    def value_at(self, t: float) -> np.ndarray:
        ends = np.cumsum(self.durations)
        i = int(np.searchsorted(ends, t, side="right"))
        return self.values[min(i, self.n_pieces - 1)]

    def check_range(self, rng: ControlRange) -> None:
        if self.m != rng.m:
            raise DimensionMismatch(f"law has {self.m} channels, range has {rng.m}")
        if not rng.contains(self.values):
            raise ControlOutOfRange("control value outside the admissible box")

    def to_records(self) -> list[dict]:
        return [
            {"duration": float(d), "values": [float(x) for x in v]}
            for d, v in zip(self.durations, self.values)
        ]

    @classmethod
    def from_records(cls, recs: Sequence[dict], m: int | None = None) -> "ControlLaw":
        if not recs:
            return cls.empty(m or 0)
        return cls([r["duration"] for r in recs], [list(r["values"]) for r in recs])

    def __eq__(self, other):
        return (
            isinstance(other, ControlLaw)
            and np.array_equal(self.durations, other.durations)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"ControlLaw({self.to_records()!r})"


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True, eq=False)
class SigmaASystem:
    """``x' = (D0 + sign sum u_j D_j) x + sum u_j Z_j(x)`` on ``(n, *)``."""

    algebra: LieAlgebra
    D0: np.ndarray
    Dj: np.ndarray
    Zj: np.ndarray
    range: ControlRange
    sign: int = 1

    def __post_init__(self):
        n = self.algebra.dim
        m = self.range.m
        D0 = np.array(self.D0, dtype=float).reshape(n, n)
        Dj = np.array(self.Dj, dtype=float)
        if Dj.size == 0:
            Dj = np.zeros((m, n, n))
        Dj = Dj.reshape(m, n, n)
        Zj = np.array(self.Zj, dtype=float).reshape(m, n)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        for name, M in [("D0", D0)] + [(f"D{j + 1}", Dj[j]) for j in range(m)]:
            rep = leibniz_check(M, self.algebra)
            if not rep.passed:
                raise NotADerivation(f"{name} fails the Leibniz rule (residual {rep.residual:.3e})", rep.residual)
        for a in (D0, Dj, Zj):
            a.setflags(write=False)
        object.__setattr__(self, "D0", D0)
        object.__setattr__(self, "Dj", Dj)
        object.__setattr__(self, "Zj", Zj)
        group_of(self.algebra)  # nilpotency guard

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def m(self) -> int:
        return self.range.m

    @property
    def group(self):
        return group_of(self.algebra)

    def D(self, u) -> np.ndarray:
        """``D(u)``; batched over leading dimensions of ``u``."""
        u = np.asarray(u, dtype=float)
        return self.D0 + self.sign * np.einsum("...j,jab->...ab", u, self.Dj)

    def Zu(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float) @ self.Zj

    def rhs(self, x, u) -> np.ndarray:
        M = self.D(u)
        return np.einsum("...ab,...b->...a", M, x) + self.group.right_invariant_field(self.Zu(u), x)

    def reversed(self) -> "SigmaASystem":
        """Time-reversed system: its forward orbits are the backward orbits of ``self``."""
        return SigmaASystem(self.algebra, -self.D0, -self.Dj, -self.Zj, self.range, self.sign)


@dataclass(frozen=True, eq=False)
class ProductSystem:
    """``v' = A v + sum u_j b_j`` on ``V`` coupled with a ``SigmaASystem``."""

    A: np.ndarray
    b: np.ndarray
    inner: SigmaASystem
    v_labels: tuple[str, ...] = ()
    x_labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        p = A.shape[0] if A.ndim == 2 else 0
        A = A.reshape(p, p)
        b = np.array(self.b, dtype=float).reshape(self.inner.m, p)
        if not is_nilpotent_matrix(A):
            raise ANotNilpotent("A^dim(V) does not vanish")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def V_dim(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.inner.m

    @property
    def range(self) -> ControlRange:
        return self.inner.range

    @property
    def dim(self) -> int:
        return self.V_dim + self.inner.dim

    def rhs(self, state, u) -> np.ndarray:
        p = self.V_dim
        v = state[..., :p]
        x = state[..., p:]
        dv = v @ self.A.T + np.asarray(u, dtype=float) @ self.b
        return np.concatenate([dv, self.inner.rhs(x, u)], axis=-1)

    def reversed(self) -> "ProductSystem":
        return ProductSystem(-self.A, -self.b, self.inner.reversed(), self.v_labels, self.x_labels)


# ---------------------------------------------------------------------------
# integration


def _rk4_fixed(rhs, x, u, duration: float, steps: int, scale: float = 1.0) -> np.ndarray:
    h = duration / steps
    for _ in range(steps):
        k1 = rhs(x, u)
        k2 = rhs(x + 0.5 * h * k1, u)
        k3 = rhs(x + 0.5 * h * k2, u)
        k4 = rhs(x + h * k3, u)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _rk4_refined(rhs, x0, u, duration: float, rtol: float = 1e-9, min_step: float = 1e-7) -> np.ndarray:
    """RK4 over one constant piece, halving the step until two runs agree."""
    x0 = np.asarray(x0, dtype=float)
    h = min(duration / 32.0, 1e-2)
    steps = max(1, int(np.ceil(duration / h - 1e-9)))
    prev = _rk4_fixed(rhs, x0, u, duration, steps)
    while True:
        steps *= 2
        cur = _rk4_fixed(rhs, x0, u, duration, steps)
        if np.max(np.abs(cur - prev)) <= rtol * (1.0 + np.max(np.abs(cur))):
            return cur
        if duration / steps < min_step:
            raise StepSizeUnderflow(f"RK4 refinement reached step {duration / steps:.2e} without converging")
        prev = cur


def flow_B(sys: SigmaASystem, law: ControlLaw, certify: bool = True) -> GroupAutomorphism:
    """``exp(t_r D(u_r)) ... exp(t_1 D(u_1))``."""
    n = sys.dim
    Phi = np.eye(n)
    for t, u in zip(law.durations, law.values):
        Phi = scipy.linalg.expm(t * sys.D(u)) @ Phi
    return GroupAutomorphism(sys.algebra, Phi, certify=certify)


def solve_A_from_identity(sys: SigmaASystem, law: ControlLaw) -> np.ndarray:
    """Endpoint from the identity, glued across pieces by the cocycle rule.

    Each piece is integrated from 0; a piece result ``a_2`` and the
    previous endpoint ``a_1`` combine as ``a_2 * exp(t_2 D(u_2)) a_1``.
    """
    G = sys.group
    a = np.zeros(sys.dim)
    for t, u in zip(law.durations, law.values):
        piece = _rk4_refined(sys.rhs, np.zeros(sys.dim), u, float(t))
        Phi = scipy.linalg.expm(t * sys.D(u))
        a = G.product(piece, Phi @ a)
    return a


def solve_A(sys: SigmaASystem, x, law: ControlLaw) -> np.ndarray:
    """``phi(S, 0, u) * Phi_B(x)``."""
    x = np.asarray(x, dtype=float)
    a = solve_A_from_identity(sys, law)
    return sys.group.product(a, flow_B(sys, law, certify=False)(x))


def solve_A_direct(sys, x, law: ControlLaw) -> np.ndarray:
    """Plain RK4 integration of the state equation from ``x`` (reference solver)."""
    x = np.asarray(x, dtype=float)
    for t, u in zip(law.durations, law.values):
        x = _rk4_refined(sys.rhs, x, u, float(t))
    return x


def _affine_piece(A: np.ndarray, t: float, c: np.ndarray, v: np.ndarray) -> np.ndarray:
    E, I = nilpotent_expm_series(A, t)
    return E @ v + I @ c


def solve_product(ps: ProductSystem, v, x, law: ControlLaw) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint of the product system; the ``V`` part is exact per piece."""
    v = np.asarray(v, dtype=float)
    for t, u in zip(law.durations, law.values):
        v = _affine_piece(ps.A, float(t), u @ ps.b, v)
    return v, solve_A(ps.inner, x, law)


def solve_product_direct(ps: ProductSystem, v, x, law: ControlLaw) -> tuple[np.ndarray, np.ndarray]:
    state = solve_A_direct(ps, np.concatenate([np.asarray(v, float), np.asarray(x, float)]), law)
    return state[: ps.V_dim], state[ps.V_dim :]


def trajectory(sys, x0, law: ControlLaw, samples_per_piece: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Sampled path ``(t, states)`` of ``sys`` (a SigmaASystem or ProductSystem state)."""
    x = np.asarray(x0, dtype=float)
    ts = [0.0]
    xs = [x]
    t0 = 0.0
    for dur, u in zip(law.durations, law.values):
        sub = float(dur) / samples_per_piece
        for k in range(samples_per_piece):
            x = _rk4_refined(sys.rhs, x, u, sub)
            ts.append(t0 + (k + 1) * sub)
            xs.append(x)
        t0 += float(dur)
    return np.array(ts), np.array(xs)


# ---------------------------------------------------------------------------
# batched fixed-step simulation used by sampling and search


def simulate_batch(
    sys,
    x0,
    durations,
    values,
    h: float = 0.02,
    record: bool = False,
):
    """Fixed-step RK4 for many piecewise-constant laws at once.

    Parameters
    ----------
    x0 : (B, d) initial states
    durations : (B, P) piece lengths (zero-length pieces are allowed)
    values : (B, P, m) piece values
    h : target step; each piece uses ``ceil(max_duration / h)`` steps with
        row-specific step sizes.
    record : also return the states and times after every step.

    Returns
    -------
    end : (B, d); and if ``record``, ``(end, path (K, B, d), times (K, B))``.
    """
    x = np.array(x0, dtype=float)
    durations = np.asarray(durations, dtype=float)
    values = np.asarray(values, dtype=float)
    B, P = durations.shape
    path = [x]
    times = [np.zeros(B)]
    t = np.zeros(B)
    rhs = sys.rhs
    for p in range(P):
        dmax = float(durations[:, p].max(initial=0.0))
        if dmax <= 0:
            continue
        steps = max(1, int(np.ceil(dmax / h)))
        hs = (durations[:, p] / steps)[:, None]
        u = values[:, p, :]
        for _ in range(steps):
            k1 = rhs(x, u)
            k2 = rhs(x + 0.5 * hs * k1, u)
            k3 = rhs(x + 0.5 * hs * k2, u)
            k4 = rhs(x + hs * k3, u)
            x = x + (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + hs[:, 0]
            if record:
                path.append(x)
                times.append(t)
    if record:
        return x, np.array(path), np.array(times)
    return x


# ---------------------------------------------------------------------------
# semidirect reduction


@dataclass(frozen=True, eq=False)
class SemidirectLCS:
    """Linear control system on a solvable group: drift derivation ``D``, controls ``Y_j``."""

    algebra: LieAlgebra
    D: np.ndarray
    Yj: np.ndarray
    range: ControlRange

    def __post_init__(self):
        n = self.algebra.dim
        D = np.array(self.D, dtype=float).reshape(n, n)
        Y = np.array(self.Yj, dtype=float).reshape(self.range.m, n)
        rep = leibniz_check(D, self.algebra)
        if not rep.passed:
            raise NotADerivation(f"drift fails the Leibniz rule (residual {rep.residual:.3e})", rep.residual)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "Yj", Y)


@dataclass(frozen=True, eq=False)
class SemidirectCoordinates:
    """Bases of ``g0`` and ``n`` and the change of coordinates ``g -> g0 x n``."""

    G0: np.ndarray  # (dim g, p)
    N: np.ndarray  # (dim g, q)
    inverse: np.ndarray  # rows: coordinates along [G0 | N]
    n_algebra: LieAlgebra
    split: object

    @property
    def p(self) -> int:
        return self.G0.shape[1]

    def coords(self, Y) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(Y, dtype=float) @ self.inverse.T
        return c[..., : self.p], c[..., self.p :]

    def ad_n(self, g: LieAlgebra, h) -> np.ndarray:
        """``ad(h)`` restricted to ``n`` for ``h`` in ``g0`` coordinates."""
        w = np.asarray(h, dtype=float) @ self.G0.T
        return self.inverse[self.p :] @ g.ad(w) @ self.N


def semidirect_coordinates(g: LieAlgebra, D) -> SemidirectCoordinates:
    ks = kernel_split(g, D)
    if ks.n0.dim > 0:
        raise N0NotTrivial(
            f"n0 = n ∩ g0 has dimension {ks.n0.dim}; a nontrivial N0 is never compact in the simply connected model"
        )
    G0 = rref_basis(ks.g0.basis)
    N = rref_basis(ks.n.basis)
    T = np.hstack([G0, N])
    inv = np.linalg.inv(T)
    inv[np.abs(inv) < 1e-14] = 0.0
    labels = []
    for col in N.T:
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        labels.append(g.labels[nz[0]] if len(nz) == 1 and abs(col[nz[0]] - 1) < 1e-12 else "")
    if "" in labels or len(set(labels)) != len(labels):
        labels = [f"n{i + 1}" for i in range(N.shape[1])]
    n_alg = restrict(g, N, labels)
    return SemidirectCoordinates(G0, N, inv, n_alg, ks)


def build_semidirect(sd: SemidirectLCS) -> ProductSystem:
    """Product-system form of an LCS on ``G0 x_rho n`` (requires ``n0 = 0``)."""
    g = sd.algebra
    sc = semidirect_coordinates(g, sd.D)
    p = sc.p
    D = sd.D
    A = sc.inverse[:p] @ D @ sc.G0
    D0 = sc.inverse[p:] @ D @ sc.N
    off = max(
        float(np.max(np.abs(sc.inverse[p:] @ D @ sc.G0), initial=0.0)),
        float(np.max(np.abs(sc.inverse[:p] @ D @ sc.N), initial=0.0)),
    )
    if off > 1e-9 * max(1.0, float(np.linalg.norm(D, 2))):
        raise NotADerivation(f"drift does not preserve g0 and n (leak {off:.3e})", off)
    if not is_nilpotent_matrix(A):
        raise ANotNilpotent("restriction of the drift to g0 is not nilpotent")
    q = D0.shape[0]
    if q:
        smin = float(np.linalg.svd(D0, compute_uv=False)[-1])
        if smin <= 1e-9 * max(1.0, float(np.linalg.norm(D0, 2))):
            raise D0Singular(f"restriction of the drift to n is singular (smallest singular value {smin:.3e})")
    b, Z = sc.coords(sd.Yj)
    Dj = np.array([sc.ad_n(g, bj) for bj in b]).reshape(sd.range.m, q, q)
    for arr in (A, D0, Dj, b, Z):
        arr[np.abs(arr) < 1e-14] = 0.0
    inner = SigmaASystem(sc.n_algebra, D0, Dj, Z, sd.range, sign=1)
    v_labels = []
    for col in sc.G0.T:
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        v_labels.append(g.labels[nz[0]] if len(nz) == 1 else f"v{len(v_labels) + 1}")
    return ProductSystem(A, b, inner, tuple(v_labels), sc.n_algebra.labels)


def _rho(g: LieAlgebra, sc: SemidirectCoordinates, h) -> np.ndarray:
    return scipy.linalg.expm(sc.ad_n(g, h))


def semidirect_group_law(sd: SemidirectLCS, p1, p2, sc: SemidirectCoordinates | None = None):
    """``(h1, X1) (h2, X2) = (h1 + h2, X1 * rho(h1) X2)`` with ``G0`` abelian."""
    g = sd.algebra
    if sc is None:
        sc = semidirect_coordinates(g, sd.D)
    h1, X1 = (np.asarray(a, dtype=float) for a in p1)
    h2, X2 = (np.asarray(a, dtype=float) for a in p2)
    G = group_of(sc.n_algebra)
    return h1 + h2, G.product(X1, _rho(g, sc, h1) @ X2)


def semidirect_field_check(sd: SemidirectLCS, Y, Z, point, eps: float = 1e-5) -> float:
    """Closed-form right-invariant field vs a central difference of the group law.

    ``Y`` is in ``g0`` coordinates, ``Z`` and the point's second entry in
    ``n`` coordinates.  Returns the max-norm residual.
    """
    g = sd.algebra
    sc = semidirect_coordinates(g, sd.D)
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    h, x = (np.asarray(a, dtype=float) for a in point)
    G = group_of(sc.n_algebra)
    closed_h = Y
    closed_x = G.right_invariant_field(Z, x) + sc.ad_n(g, Y) @ x
    plus = semidirect_group_law(sd, (eps * Y, eps * Z), (h, x), sc)
    minus = semidirect_group_law(sd, (-eps * Y, -eps * Z), (h, x), sc)
    fd_h = (plus[0] - minus[0]) / (2 * eps)
    fd_x = (plus[1] - minus[1]) / (2 * eps)
    return float(max(np.max(np.abs(fd_h - closed_h), initial=0.0), np.max(np.abs(fd_x - closed_x), initial=0.0)))


# ---------------------------------------------------------------------------
# time rescaling


@dataclass(frozen=True)
class TimeMap:
    """Piecewise-linear increasing map ``s -> integral_0^s v``."""

    knots_s: np.ndarray
    knots_t: np.ndarray

    def __call__(self, s):
        return np.interp(s, self.knots_s, self.knots_t)

    def inverse(self, t):
        return np.interp(t, self.knots_t, self.knots_s)


def rescale_control(u_alpha: ControlLaw, v: ControlLaw, alpha: float) -> tuple[ControlLaw, TimeMap]:
    """Undo a speed change.

    The rescaled system ``y' = v(s) f(y, u_alpha(s))`` satisfies
    ``y(s) = x(sigma(s))`` where ``sigma(s) = integral_0^s v`` and ``x``
    solves the original system under ``u(sigma(s)) = u_alpha(s)``.
    Returns ``u`` and ``sigma``; ``v`` is a one-channel law on the same
    horizon with values in ``(1/alpha, alpha)``.
    """
    if alpha <= 1:
        raise ControlOutOfRange("alpha must exceed 1")
    vv = v.values[:, 0]
    if np.any(vv <= 1.0 / alpha) or np.any(vv >= alpha):
        raise ControlOutOfRange(f"speed values must lie in (1/{alpha}, {alpha})")
    if abs(u_alpha.total_time - v.total_time) > 1e-12 * max(1.0, v.total_time):
        raise DimensionMismatch("u_alpha and v must share the same horizon")
    cuts = np.union1d(np.cumsum(u_alpha.durations), np.cumsum(v.durations))
    cuts = cuts[cuts > 0]
    starts = np.concatenate([[0.0], cuts[:-1]])
    ds = cuts - starts
    keep = ds > 1e-15
    starts, ds = starts[keep], ds[keep]
    mids = starts + ds / 2
    speeds = np.array([v.value_at(s)[0] for s in mids])
    vals = np.array([u_alpha.value_at(s) for s in mids]).reshape(-1, u_alpha.m)
    dt = speeds * ds
    u = ControlLaw(dt, vals)
    knots_s = np.concatenate([[0.0], np.cumsum(ds)])
    knots_t = np.concatenate([[0.0], np.cumsum(dt)])
    return u, TimeMap(knots_s, knots_t)


def solve_rescaled(sys, x, u_alpha: ControlLaw, v: ControlLaw) -> np.ndarray:
    """Direct RK4 solution of ``y' = v(s) f(y, u_alpha(s))`` from ``x``."""
    cuts = np.union1d(np.cumsum(u_alpha.durations), np.cumsum(v.durations))
    y = np.asarray(x, dtype=float)
    start = 0.0
    for end in cuts[cuts > 0]:
        mid = 0.5 * (start + end)
        speed = float(v.value_at(mid)[0])
        u = u_alpha.value_at(mid)
        y = _rk4_refined(lambda z, w, c=speed: c * sys.rhs(z, w), y, u, float(end - start))
        start = end
    return y
