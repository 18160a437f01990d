"""Accessibility, periodic seeds, reachability sampling and control-set estimates."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .algebra import LieAlgebra, is_solvable
from .derivation import (
    CompactnessVerdict,
    check_jordan_parts,
    jordan_decomposition,
    kernel_split,
    n0_compactness_criterion,
)
from .dynamics import (
    ControlLaw,
    ProductSystem,
    SemidirectLCS,
    SigmaASystem,
    build_semidirect,
    flow_B,
    simulate_batch,
    solve_A,
    solve_A_direct,
    solve_A_from_identity,
    solve_product,
)
from .errors import (
    DetGapTooSmall,
    N0NotTrivial,
    NotSolvable,
    PeriodicityResidualExceeded,
    SolvctrlError,
)
from .linalg import rank
from .nilgroup import f_phi_invert, group_of, tol_det

log = logging.getLogger(__name__)

__all__ = [
    "AccessibilityReport",
    "larc_check",
    "system_fields",
    "field_bracket",
    "SeedCertificate",
    "seed_finder",
    "ScanResult",
    "seed_family_scan",
    "ReachCloud",
    "reach_sample",
    "SearchResult",
    "cross_reachability",
    "ControlSetEstimate",
    "control_set_estimate",
    "FiberReport",
    "fiber_closure_check",
    "PipelineReport",
    "full_pipeline",
]


# ---------------------------------------------------------------------------
# uniform handling of the two system types


def _inner(sys) -> SigmaASystem:
    return sys.inner if isinstance(sys, ProductSystem) else sys


def _V_dim(sys) -> int:
    return sys.V_dim if isinstance(sys, ProductSystem) else 0


def _solve(sys, state, law: ControlLaw) -> np.ndarray:
    """Certified endpoint of ``sys`` from ``state``."""
    state = np.asarray(state, dtype=float)
    if isinstance(sys, ProductSystem):
        p = sys.V_dim
        v, x = solve_product(sys, state[:p], state[p:], law)
        return np.concatenate([v, x])
    return solve_A(sys, state, law)


# ---------------------------------------------------------------------------
# accessibility


@dataclass(frozen=True)
class StructuredField:
    """Vector field ``(v, x) -> (A v + b, D x + Z(x))`` with ``Z`` right-invariant."""

    A: np.ndarray
    b: np.ndarray
    D: np.ndarray
    Z: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.b, self.D.ravel(), self.Z])

    def evaluate(self, g: LieAlgebra, state) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        p = self.A.shape[0]
        v, x = state[..., :p], state[..., p:]
        dv = v @ self.A.T + self.b
        dx = x @ self.D.T + group_of(g).right_invariant_field(self.Z, x)
        return np.concatenate([dv, dx], axis=-1)


def field_bracket(g: LieAlgebra, f: StructuredField, h: StructuredField) -> StructuredField:
    """``[f, h] = J_h f - J_f h`` in closed form.

    Linear parts commute as matrices, a linear field against a
    right-invariant one gives ``-(D Z)``, and two right-invariant fields
    give ``-[Z1, Z2]`` (right-invariant fields anti-represent the algebra).
    """
    return StructuredField(
        h.A @ f.A - f.A @ h.A,
        h.A @ f.b - f.A @ h.b,
        h.D @ f.D - f.D @ h.D,
        h.D @ f.Z - f.D @ h.Z - g.bracket(f.Z, h.Z),
    )


def system_fields(sys) -> tuple[StructuredField, list[StructuredField]]:
    """Drift ``f0`` and control fields ``f1 .. fm`` of a system."""
    inner = _inner(sys)
    p = _V_dim(sys)
    n = inner.dim
    A = sys.A if isinstance(sys, ProductSystem) else np.zeros((0, 0))
    f0 = StructuredField(A.copy(), np.zeros(p), inner.D0.copy(), np.zeros(n))
    fj = []
    for j in range(inner.m):
        bj = sys.b[j].copy() if isinstance(sys, ProductSystem) else np.zeros(0)
        fj.append(StructuredField(np.zeros((p, p)), bj, inner.sign * inner.Dj[j], inner.Zj[j].copy()))
    return f0, fj


def _saturate(g: LieAlgebra, seed: list[StructuredField], others: list[StructuredField], max_iter: int = 50):
    """Span of ``seed`` closed under brackets with itself and with ``others``."""
    basis: list[StructuredField] = []
    mat = np.zeros((0, seed[0].flat().size if seed else 0))

    def add(f):
        nonlocal mat
        cand = np.vstack([mat, f.flat()])
        if rank(cand) > mat.shape[0]:
            mat = cand
            basis.append(f)
            return True
        return False

    for f in seed:
        add(f)
    for _ in range(max_iter):
        grew = False
        pool = basis + others
        for f in list(basis):
            for h in pool:
                if add(field_bracket(g, f, h)):
                    grew = True
        if not grew:
            break
    return basis


@dataclass
class AccessibilityReport:
    L_dim_at_points: list[tuple[list[float], int]]
    L0_dim_at_points: list[tuple[list[float], int]]
    state_dim: int
    L_algebra_dim: int
    L0_algebra_dim: int

    @property
    def larc(self) -> bool:
        return all(r == self.state_dim for _, r in self.L_dim_at_points)

    @property
    def strong(self) -> bool:
        return all(r == self.state_dim for _, r in self.L0_dim_at_points)

    def as_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "larc": self.larc,
            "strong": self.strong,
            "L_algebra_dim": self.L_algebra_dim,
            "L0_algebra_dim": self.L0_algebra_dim,
            "L_rank_at_points": [{"point": p, "rank": r} for p, r in self.L_dim_at_points],
            "L0_rank_at_points": [{"point": p, "rank": r} for p, r in self.L0_dim_at_points],
        }


def larc_check(sys, points: Sequence | None = None) -> AccessibilityReport:
    """Rank of the system Lie algebra and of its ideal ``L0`` at ``points``.

    ``L`` is generated by the drift and control fields; ``L0`` is the ideal
    of ``L`` generated by the control fields.  Default points: the origin.
    """
    inner = _inner(sys)
    g = inner.algebra
    d = _V_dim(sys) + inner.dim
    if points is None:
        points = [np.zeros(d)]
    f0, fj = system_fields(sys)
    L = _saturate(g, [f0] + fj, [])
    L0 = _saturate(g, fj, L) if fj else []

    def ranks(fields):
        out = []
        for p in points:
            p = np.asarray(p, dtype=float)
            if not fields:
                out.append(([float(c) for c in p], 0))
                continue
            M = np.array([f.evaluate(g, p) for f in fields])
            out.append(([float(c) for c in p], rank(M)))
        return out

    return AccessibilityReport(ranks(L), ranks(L0), d, len(L), len(L0))


# ---------------------------------------------------------------------------
# seeds


@dataclass
class SeedCertificate:
    S: float
    law: ControlLaw
    det_gap: float
    x_star: np.ndarray
    a: np.ndarray
    algebraic_residual: float
    periodicity_residual: float
    inversion_residual: float

    def as_dict(self) -> dict:
        return {
            "S": self.S,
            "law": self.law.to_records(),
            "det_gap": self.det_gap,
            "x_star": [float(c) for c in self.x_star],
            "algebraic_residual": self.algebraic_residual,
            "periodicity_residual": self.periodicity_residual,
            "inversion_residual": self.inversion_residual,
        }


TOL_SEED = 1e-7


def seed_finder(sys: SigmaASystem, law: ControlLaw, tol_seed: float = TOL_SEED) -> SeedCertificate:
    """Periodic point ``x* = phi(S, x*, u)`` from the fixed-point construction.

    With ``Phi = Phi_B(S, u)`` and ``a = phi(S, 0, u)`` the periodic point
    solves ``x* * Phi(x*)^-1 = a``.  It is checked algebraically and by an
    independent re-integration from ``x*``.
    """
    G = sys.group
    Phi = flow_B(sys, law)
    n = sys.dim
    gap = abs(float(np.linalg.det(Phi.matrix - np.eye(n))))
    if gap <= tol_det(Phi.matrix):
        raise DetGapTooSmall(f"|det(Phi - I)| = {gap:.3e} for this law", None)
    a = solve_A_from_identity(sys, law)
    x = f_phi_invert(sys.algebra, Phi, a)
    inv_res = float(np.linalg.norm(G.product(x, -Phi(x)) - a))
    alg_res = float(np.linalg.norm(G.product(a, Phi(x)) - x))
    per_res = float(np.linalg.norm(solve_A_direct(sys, x, law) - x))
    if per_res > tol_seed * (1.0 + float(np.linalg.norm(x))):
        raise PeriodicityResidualExceeded(f"re-integration misses x* by {per_res:.3e}", per_res)
    return SeedCertificate(law.total_time, law, gap, x, a, alg_res, per_res, inv_res)


def _det_sign_path(sys: SigmaASystem, law: ControlLaw, n_checks: int, floor: float) -> tuple[bool, float]:
    """Does ``det(I - Phi(t u))`` keep the sign of ``t = 0`` for ``t`` in [0, 1]?"""
    n = sys.dim
    vals = []
    for t in np.linspace(0.0, 1.0, n_checks):
        M = flow_B(sys, ControlLaw(law.durations, t * law.values), certify=False).matrix
        vals.append(float(np.linalg.det(np.eye(n) - M)))
    vals = np.array(vals)
    ok = bool(np.all(np.sign(vals) == np.sign(vals[0])) and np.all(np.abs(vals) > floor))
    return ok, float(abs(vals[-1]))


@dataclass
class ScanResult:
    certificates: list[SeedCertificate]
    failures: dict
    report: dict
    consistency: dict | None = None


def _random_law(rng: np.random.Generator, sys, S: float, pieces: int, scale: float) -> ControlLaw:
    d = rng.dirichlet(np.ones(pieces)) * S
    v = scale * sys.range.sample(rng, pieces)
    return ControlLaw(d, v)


def seed_family_scan(
    sys: SigmaASystem,
    S: float,
    n_laws: int,
    rng_seed: int = 0,
    pieces: int = 4,
    scale: float = 0.5,
    min_gap: float = 1e-3,
    n_checks: int = 11,
) -> ScanResult:
    """Seeds from ``n_laws`` laws on ``[0, S]``; law 0 is ``u = 0``.

    Random laws are drawn near 0 and kept only when ``det(I - Phi)`` stays
    on the sign of the zero law along the segment joining them to 0 (the
    proxy for the connected component of admissible laws through 0).  The
    amplitude halves on rejection, up to five times.
    """
    n = sys.dim
    Phi0 = flow_B(sys, ControlLaw.zero(sys.m, S), certify=False).matrix
    det0 = float(np.linalg.det(np.eye(n) - Phi0))
    report = {"S": S, "n_laws": n_laws, "det_at_zero_law": det0, "rng_seed": rng_seed}
    if abs(det0) <= max(tol_det(Phi0), min_gap):
        report["status"] = "resonant"
        report["note"] = (
            f"|det(I - exp(S D0))| = {abs(det0):.3e}: the zero law has no isolated periodic point, "
            "so every law near 0 is rejected"
        )
        return ScanResult([], {i: "resonant horizon" for i in range(n_laws)}, report)
    certs: list[SeedCertificate] = []
    failures: dict = {}
    for i in range(n_laws):
        if i == 0:
            law = ControlLaw.zero(sys.m, S)
        else:
            rng = np.random.default_rng([rng_seed, i])
            amp = scale
            law = None
            for _ in range(6):
                cand = _random_law(rng, sys, S, pieces, amp)
                ok, _ = _det_sign_path(sys, cand, n_checks, min_gap)
                if ok:
                    law = cand
                    break
                amp *= 0.5
            if law is None:
                failures[i] = "no law passed the det-gap filter"
                continue
        try:
            certs.append(seed_finder(sys, law))
        except SolvctrlError as e:
            failures[i] = str(e)
    report["status"] = "ok"
    report["accepted"] = len(certs)
    report["density_note"] = "consistent with density" if not failures else "some laws rejected"
    return ScanResult(certs, failures, report)


# ---------------------------------------------------------------------------
# sampling


@dataclass
class ReachCloud:
    base: np.ndarray
    direction: str
    points: np.ndarray  # (k, d); row 0 is the base point
    times: np.ndarray
    law_ids: np.ndarray
    rng_seed: int
    laws: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.points)


def _sample_laws(sys, rng_seed: int, budget: int, horizon: float, max_pieces: int, stream: int = 0):
    """``budget`` random laws as padded arrays; each law has its own RNG stream."""
    m = sys.m
    dur = np.zeros((budget, max_pieces))
    val = np.zeros((budget, max_pieces, m))
    for i in range(budget):
        rng = np.random.default_rng([rng_seed, stream, i])
        k = int(rng.integers(1, max_pieces + 1))
        total = rng.uniform(0.0, horizon)
        dur[i, :k] = rng.dirichlet(np.ones(k)) * total
        val[i, :k] = sys.range.sample(rng, k)
    return dur, val


def _law_from_row(d: np.ndarray, v: np.ndarray) -> ControlLaw:
    keep = d > 0
    return ControlLaw(d[keep], v[keep], m=v.shape[-1])


def reach_sample(
    sys,
    x0,
    direction: str = "forward",
    budget: int = 1000,
    horizon: float = 2.0,
    rng_seed: int = 0,
    max_pieces: int = 4,
    h: float = 0.01,
    batch: int = 2048,
) -> ReachCloud:
    """Endpoints of ``budget`` random laws from ``x0``.

    ``direction='backward'`` runs the time-reversed system, so the cloud
    samples points that can be steered to ``x0``.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    x0 = np.asarray(x0, dtype=float)
    model = sys if direction == "forward" else sys.reversed()
    dur, val = _sample_laws(sys, rng_seed, budget, horizon, max_pieces, stream=0 if direction == "forward" else 1)
    ends = np.zeros((budget, x0.size))
    for s in range(0, budget, batch):
        e = min(budget, s + batch)
        ends[s:e] = simulate_batch(model, np.tile(x0, (e - s, 1)), dur[s:e], val[s:e], h=h)
    pts = np.vstack([x0[None, :], ends])
    times = np.concatenate([[0.0], dur.sum(axis=1)])
    ids = np.arange(-1, budget)
    laws = [(dur[i], val[i]) for i in range(budget)]
    return ReachCloud(x0, direction, pts, times, ids, rng_seed, laws)


# ---------------------------------------------------------------------------
# steering search


@dataclass
class SearchResult:
    found: bool
    law: ControlLaw | None
    distance: float
    shots: int
    status: str

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "distance": self.distance,
            "shots": self.shots,
            "law": self.law.to_records() if self.law is not None else None,
        }


def _trajectory_hits(sys, x0, target, dur, val, h):
    """Best approach of each law's path to ``target``: (distance, time)."""
    B = dur.shape[0]
    _, path, times = simulate_batch(sys, np.tile(x0, (B, 1)), dur, val, h=h, record=True)
    dist = np.linalg.norm(path - target, axis=-1)  # (K, B)
    k = np.argmin(dist, axis=0)
    idx = np.arange(B)
    return dist[k, idx], times[k, idx]


def cross_reachability(
    sys,
    start,
    target,
    ball: float = 0.05,
    budget: int = 100_000,
    horizon: float = 3.0,
    rng_seed: int = 0,
    max_pieces: int = 4,
    batch: int = 256,
    h: float = 0.05,
    refine_every: int = 1,
) -> SearchResult:
    """Search for a law steering ``start`` into the ``ball`` around ``target``.

    Random shooting with hit detection along the whole path, interleaved
    with pattern search on the best law (all single-coordinate moves of
    piece values and durations evaluated as one batch).  Candidates are
    re-solved with the certified solver before acceptance.  ``budget``
    counts simulated laws; running out yields status ``unverified``.
    """
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    m = sys.m
    radii = np.asarray(sys.range.radii)
    d0 = float(np.linalg.norm(start - target))
    if d0 <= ball:
        return SearchResult(True, ControlLaw.empty(m), d0, 0, "verified")
    shots = 0
    best = None  # (distance, dur, val)
    step_v = 0.5
    step_t = 0.25 * horizon / max_pieces
    aim = 0.5 * ball
    stream = 0

    def verify(dur, val, t_hit):
        law = _law_from_row(dur, val).truncated(t_hit) if t_hit > 0 else ControlLaw.empty(m)
        if law.n_pieces == 0:
            return None
        end = _solve(sys, start, law)
        dist = float(np.linalg.norm(end - target))
        return (law, dist) if dist <= ball else None

    def consider(D, V, dist, thit):
        nonlocal best
        order = np.argsort(dist)
        for i in order[:3]:
            if dist[i] <= aim:
                ok = verify(D[i], V[i], thit[i])
                if ok is not None:
                    return ok
        i = order[0]
        if best is None or dist[i] < best[0]:
            best = (float(dist[i]), D[i].copy(), V[i].copy())
        return None

    while shots < budget:
        nb = min(batch, budget - shots)
        D, V = _sample_laws(sys, rng_seed, nb, horizon, max_pieces, stream=1000 + stream)
        stream += 1
        dist, thit = _trajectory_hits(sys, start, target, D, V, h)
        shots += nb
        res = consider(D, V, dist, thit)
        if res is not None:
            return SearchResult(True, res[0], res[1], shots, "verified")
        # pattern search rounds on the incumbent
        for _ in range(refine_every * 8):
            if shots >= budget or best is None:
                break
            _, bd, bv = best
            cands_d = []
            cands_v = []
            for pi in range(max_pieces):
                for sgn in (1.0, -1.0):
                    nd = bd.copy()
                    nd[pi] = max(0.0, nd[pi] + sgn * step_t)
                    if nd.sum() > horizon:
                        nd *= horizon / nd.sum()
                    cands_d.append(nd)
                    cands_v.append(bv.copy())
                    for j in range(m):
                        nv = bv.copy()
                        nv[pi, j] = np.clip(nv[pi, j] + sgn * step_v * radii[j], -radii[j], radii[j])
                        cands_d.append(bd.copy())
                        cands_v.append(nv)
            CD = np.array(cands_d)
            CV = np.array(cands_v)
            take = min(len(CD), budget - shots)
            CD, CV = CD[:take], CV[:take]
            dist, thit = _trajectory_hits(sys, start, target, CD, CV, h)
            shots += take
            prev = best[0]
            res = consider(CD, CV, dist, thit)
            if res is not None:
                return SearchResult(True, res[0], res[1], shots, "verified")
            if best[0] >= prev:
                step_v *= 0.5
                step_t *= 0.5
                if step_v < 1e-4:
                    step_v = 0.5
                    step_t = 0.25 * horizon / max_pieces
                    best = None
                    break
    return SearchResult(False, None, best[0] if best else d0, shots, "unverified")


# ---------------------------------------------------------------------------
# control sets


@dataclass
class ControlSetEstimate:
    seeds: list[np.ndarray]
    inliers: np.ndarray
    bbox: tuple[list[float], list[float]] | None
    transitions: dict  # (i, j) -> SearchResult
    label: str
    forward: list[ReachCloud] = field(default_factory=list, repr=False)
    backward: list[ReachCloud] = field(default_factory=list, repr=False)
    r_match: float = 0.05

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "seeds": [[float(c) for c in s] for s in self.seeds],
            "n_inliers": int(len(self.inliers)),
            "bbox": self.bbox,
            "r_match": self.r_match,
            "transitions": [
                {"from": i, "to": j, **r.as_dict()} for (i, j), r in sorted(self.transitions.items())
            ],
        }


def control_set_estimate(
    sys,
    seeds: Sequence,
    budget: int = 2000,
    horizon: float = 2.0,
    r_match: float = 0.05,
    rng_seed: int = 0,
    search_budget: int = 100_000,
    search_horizon: float = 3.0,
    max_pieces: int = 4,
    verify_pairs: bool = True,
) -> ControlSetEstimate:
    """Inliers of forward and backward clouds around the seeds.

    A forward sample counts as an inlier when some backward sample lies
    within ``r_match`` (approximate mutual reachability with a seed).
    Seeds are linked by steering searches in both directions.
    """
    seeds = [np.asarray(s.x_star if isinstance(s, SeedCertificate) else s, dtype=float) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    fwd = []
    bwd = []
    for i, s in enumerate(seeds):
        fwd.append(reach_sample(sys, s, "forward", budget, horizon, rng_seed + 7919 * i, max_pieces))
        bwd.append(reach_sample(sys, s, "backward", budget, horizon, rng_seed + 7919 * i + 1, max_pieces))
    F = np.vstack([c.points for c in fwd])
    Bk = np.vstack([c.points for c in bwd])
    tree = cKDTree(Bk)
    dist, _ = tree.query(F, k=1)
    inl = F[dist <= r_match]
    if len(inl) == 0:
        inl = np.array(seeds)
    bbox = ([float(c) for c in inl.min(axis=0)], [float(c) for c in inl.max(axis=0)])
    transitions = {}
    if verify_pairs and len(seeds) > 1:
        for i in range(len(seeds)):
            for j in range(len(seeds)):
                if i == j:
                    continue
                transitions[(i, j)] = cross_reachability(
                    sys, seeds[i], seeds[j], r_match, search_budget, search_horizon,
                    rng_seed=rng_seed + 1000 * i + j, max_pieces=max_pieces,
                )
    if len(seeds) == 1:
        label = "UNIQUE-CONSISTENT"
    elif transitions and all(r.found for r in transitions.values()):
        label = "UNIQUE-CONSISTENT"
    elif not transitions:
        label = "PAIRS-NOT-CHECKED"
    else:
        label = "UNVERIFIED-PAIRS"
    return ControlSetEstimate(seeds, inl, bbox, transitions, label, fwd, bwd, r_match)


@dataclass
class FiberReport:
    grid: list[list[float]]
    forward: list[bool]
    backward: list[bool]
    details: list[dict]

    @property
    def both(self) -> list[bool]:
        return [a and b for a, b in zip(self.forward, self.backward)]

    @property
    def fraction(self) -> float:
        return sum(self.both) / len(self.both) if self.both else 1.0

    def as_dict(self) -> dict:
        return {
            "grid": self.grid,
            "forward": self.forward,
            "backward": self.backward,
            "verified_both_ways": self.both,
            "fraction": self.fraction,
            "details": self.details,
        }


def fiber_closure_check(
    ps: ProductSystem,
    x_star,
    grid: Sequence,
    ball: float = 0.1,
    budget: int = 100_000,
    horizon: float = 6.0,
    rng_seed: int = 0,
    max_pieces: int = 6,
) -> FiberReport:
    """Steer ``(0, x*) <-> (v, x*)`` for every grid point ``v``.

    For ``v`` in ``ker A`` a solution from ``(v, x)`` is the one from
    ``(0, x)`` shifted by ``(v, 0)``, so the return trip is searched as
    ``(0, x*) -> (-v, x*)``.
    """
    x_star = np.asarray(x_star, dtype=float)
    p = ps.V_dim
    origin = np.concatenate([np.zeros(p), x_star])
    fwd, bwd, details, gl = [], [], [], []
    for k, v in enumerate(grid):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        gl.append([float(c) for c in v])
        in_ker = bool(np.linalg.norm(ps.A @ v) <= 1e-12 * (1 + np.linalg.norm(v)))
        there = np.concatenate([v, x_star])
        r1 = cross_reachability(ps, origin, there, ball, budget, horizon, rng_seed + 2 * k, max_pieces)
        if in_ker:
            back_target = np.concatenate([-v, x_star])
            r2 = cross_reachability(ps, origin, back_target, ball, budget, horizon, rng_seed + 2 * k + 1, max_pieces)
        else:
            r2 = cross_reachability(ps, there, origin, ball, budget, horizon, rng_seed + 2 * k + 1, max_pieces)
        fwd.append(r1.found)
        bwd.append(r2.found)
        details.append({"v": gl[-1], "to": r1.as_dict(), "back": r2.as_dict(), "shifted_return": in_ker})
    return FiberReport(gl, fwd, bwd, details)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineReport:
    hypotheses: dict
    stages: dict
    stopped_at: str | None = None
    error: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.stopped_at is None

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "stopped_at": self.stopped_at,
            "error": self.error,
            "hypotheses": self.hypotheses,
            "warnings": self.warnings,
            "stages": self.stages,
        }


def full_pipeline(
    sd: SemidirectLCS,
    S: float = 1.0,
    n_laws: int = 3,
    rng_seed: int = 0,
    cloud_budget: int = 1000,
    horizon: float = 2.0,
    r_match: float = 0.05,
    search_budget: int = 100_000,
    search_horizon: float = 3.0,
    grid: Sequence | None = None,
    fiber_ball: float = 0.1,
    fiber_horizon: float = 6.0,
    verify_pairs: bool = True,
) -> PipelineReport:
    """Reduction to a product system followed by the seed and sampling experiments.

    Guard failures stop the run; the failing hypothesis is recorded in
    ``stopped_at``.
    """
    hyp: dict = {}
    stages: dict = {}
    rep = PipelineReport(hyp, stages)
    g = sd.algebra

    def stop(name, err):
        rep.stopped_at = name
        rep.error = str(err)
        return rep

    hyp["solvable"] = is_solvable(g)
    if not hyp["solvable"]:
        return stop("solvable", NotSolvable("derived series does not terminate at 0"))
    ks = kernel_split(g, sd.D)
    stages["kernel_split"] = ks.as_dict()
    hyp["n_plus_g0_is_g"] = ks.sum_is_everything
    parts = jordan_decomposition(sd.D)
    jr = check_jordan_parts(sd.D, parts, g)
    stages["jordan"] = {k: v for k, v in jr.items()}
    verdict, note = n0_compactness_criterion(ks.n0)
    hyp["N0 compact (n0 = 0)"] = verdict is CompactnessVerdict.COMPACT
    stages["n0_criterion"] = {"verdict": verdict.value, "note": note}
    if verdict is not CompactnessVerdict.COMPACT:
        return stop("N0 compact (n0 = 0)", N0NotTrivial(note))
    try:
        ps = build_semidirect(sd)
    except SolvctrlError as e:
        return stop(getattr(e, "hypothesis", type(e).__name__), e)
    hyp["A nilpotent"] = True
    hyp["det D0 != 0"] = True
    stages["product_system"] = {
        "V_dim": ps.V_dim,
        "A": ps.A.tolist(),
        "b": ps.b.tolist(),
        "D0": ps.inner.D0.tolist(),
        "Dj": ps.inner.Dj.tolist(),
        "Zj": ps.inner.Zj.tolist(),
        "v_labels": list(ps.v_labels),
        "x_labels": list(ps.x_labels),
    }
    acc = larc_check(ps)
    hyp["LARC"] = acc.larc
    stages["larc"] = acc.as_dict()
    if not acc.larc:
        rep.warnings.append("LARC fails at the origin: seeds are computed but need not be interior points")
    scan = seed_family_scan(ps.inner, S, n_laws, rng_seed)
    stages["seeds"] = {
        "report": scan.report,
        "certificates": [c.as_dict() for c in scan.certificates],
        "failures": {str(k): v for k, v in scan.failures.items()},
    }
    if not scan.certificates:
        return stop("det(I - phi) != 0", DetGapTooSmall("no seed certificate could be produced"))
    p = ps.V_dim
    seeds = [np.concatenate([np.zeros(p), c.x_star]) for c in scan.certificates]
    est = control_set_estimate(
        ps, seeds, cloud_budget, horizon, r_match, rng_seed, search_budget, search_horizon,
        verify_pairs=verify_pairs,
    )
    stages["control_set"] = est.as_dict()
    if p > 0:
        if grid is None:
            grid = [[float(k)] * p for k in range(-2, 3)]
        fr = fiber_closure_check(ps, scan.certificates[0].x_star, grid, fiber_ball, search_budget, fiber_horizon, rng_seed)
        stages["fiber"] = fr.as_dict()
    return rep
