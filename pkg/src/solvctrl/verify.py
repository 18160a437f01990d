"""Invariant suites run by ``solvctrl verify``."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .analysis import larc_check, seed_family_scan, seed_finder
from .derivation import (
    check_jordan_parts,
    derivation_basis,
    generalized_kernel_report,
    jordan_decomposition,
    kernel_split,
    leibniz_check,
)
from .dynamics import ControlLaw, ProductSystem, flow_B, solve_A, solve_A_direct, solve_product
from .errors import SolvctrlError
from .nilgroup import GroupAutomorphism, f_phi_apply, f_phi_invert, group_of
from .sysfile import SystemSpec, dump_system, parse_system

Check = tuple[str, bool, str]


def random_law(rng: np.random.Generator, system, max_time: float = 2.0, pieces: int = 3) -> ControlLaw:
    k = int(rng.integers(1, pieces + 1))
    d = rng.dirichlet(np.ones(k)) * rng.uniform(0.1, max_time)
    return ControlLaw(d, system.range.sample(rng, k))


def random_derivation(rng: np.random.Generator, basis: np.ndarray) -> np.ndarray:
    return np.tensordot(rng.normal(size=len(basis)), basis, axes=1)


def random_automorphism(rng, g, basis, min_gap: float = 0.1, scale: float = 0.7) -> GroupAutomorphism:
    while True:
        Phi = GroupAutomorphism(g, scipy.linalg.expm(scale * random_derivation(rng, basis)))
        if Phi.det_gap >= min_gap:
            return Phi


def _run(name: str, fn: Callable[[], tuple[bool, str]]) -> Check:
    try:
        ok, detail = fn()
    except SolvctrlError as e:
        return name, False, f"{type(e).__name__}: {e}"
    return name, bool(ok), detail


def verify_spec(spec: SystemSpec, rng_seed: int = 0, quick: bool = False) -> list[Check]:
    rng = np.random.default_rng(rng_seed)
    reps = 20 if quick else 100
    g = spec.algebra
    D = spec.derivation
    out: list[Check] = []

    def jacobi():
        r = g.jacobi_residual()
        return r <= 1e-10 * g.scale**2, f"residual {r:.2e}"

    def roundtrip():
        again = parse_system(dump_system(spec))
        return again.to_dict() == spec.to_dict(), "parse/serialize/parse"

    def leibniz():
        r = leibniz_check(D, g)
        return r.passed, f"residual {r.residual:.2e}"

    def jordan():
        basis = derivation_basis(g)
        worst = 0.0
        angle = 0.0
        mats = [D] + [random_derivation(rng, basis) for _ in range(reps)]
        for M in mats:
            rep = check_jordan_parts(M, jordan_decomposition(M), g)
            worst = max(worst, max(v for k, v in rep.items() if k != "passed"))
            angle = max(angle, generalized_kernel_report(M)["max_angle"])
        return worst <= 1e-9 and angle <= 1e-8, f"{len(mats)} derivations, worst {worst:.2e}, angle {angle:.2e}"

    out += [_run("jacobi", jacobi), _run("file round-trip", roundtrip), _run("leibniz", leibniz), _run("jordan", jordan)]

    if spec.kind == "lcs":
        def split():
            ks = kernel_split(g, D)
            return ks.sum_is_everything, f"dims {ks.dims}"

        out.append(_run("n + g0 = g", split))

    try:
        model = spec.model()
    except SolvctrlError as e:
        out.append(("reduction", False, f"{type(e).__name__}: {e}"))
        return out
    inner = model.inner if isinstance(model, ProductSystem) else model
    n = inner.algebra
    G = group_of(n)
    nbasis = derivation_basis(n)

    def assoc():
        x, y, z = rng.normal(size=(3, reps, n.dim))
        r = np.max(np.abs(G.product(G.product(x, y), z) - G.product(x, G.product(y, z))), initial=0.0)
        return r <= 1e-10 * (1 + np.max(np.abs(x)) ** 3), f"{reps} triples, max {r:.2e}"

    def field():
        worst = 0.0
        h = 1e-5
        for _ in range(reps):
            Z, x = rng.normal(size=(2, n.dim))
            fd = (G.product(h * Z, x) - G.product(-h * Z, x)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - G.right_invariant_field(Z, x)))))
        return worst <= 1e-6, f"max {worst:.2e}"

    def invert():
        worst = 0.0
        for _ in range(reps):
            Phi = random_automorphism(rng, n, nbasis)
            x = rng.normal(size=n.dim)
            worst = max(worst, float(np.max(np.abs(f_phi_invert(n, Phi, f_phi_apply(n, Phi, x)) - x))))
        return worst <= 1e-9, f"max {worst:.2e}"

    def flows():
        worst = 0.0
        for _ in range(reps):
            worst = max(worst, flow_B(inner, random_law(rng, inner)).residual)
        return worst <= 1e-9, f"max bracket residual {worst:.2e}"

    def translation():
        worst = 0.0
        for _ in range(max(3, reps // 10)):
            law = random_law(rng, inner)
            x = rng.normal(size=inner.dim)
            worst = max(worst, float(np.max(np.abs(solve_A(inner, x, law) - solve_A_direct(inner, x, law)))))
        return worst <= 1e-6, f"max {worst:.2e}"

    def seeds():
        c0 = seed_finder(inner, ControlLaw.zero(inner.m, spec.analysis.S))
        scan = seed_family_scan(inner, spec.analysis.S, 3, rng_seed)
        res = max((c.periodicity_residual for c in scan.certificates), default=0.0)
        ok = not np.any(c0.x_star) and len(scan.certificates) == 3 and res <= 1e-7
        return ok, f"{len(scan.certificates)} certificates, periodicity {res:.2e}"

    def larc():
        rep = larc_check(model)
        return rep.larc, f"rank {rep.L_dim_at_points[0][1]} of {rep.state_dim}"

    out += [
        _run("bch associativity", assoc),
        _run("right-invariant field", field),
        _run("f_phi inversion", invert),
        _run("automorphism flow", flows),
        _run("translation identity", translation),
        _run("seeds", seeds),
        _run("larc", larc),
    ]

    if isinstance(model, ProductSystem):
        def shift():
            ps = model
            K = scipy.linalg.null_space(ps.A) if ps.V_dim else np.zeros((0, 0))
            worst = 0.0
            for _ in range(max(3, reps // 10)):
                v = K @ rng.normal(size=K.shape[1])
                x = rng.normal(size=inner.dim)
                law = random_law(rng, inner)
                v1, x1 = solve_product(ps, v, x, law)
                v0, x0 = solve_product(ps, np.zeros(ps.V_dim), x, law)
                worst = max(worst, float(np.max(np.abs(v1 - v0 - v))), float(np.max(np.abs(x1 - x0))))
            return worst <= 1e-9, f"max {worst:.2e}"

        out.append(_run("ker A shift", shift))
    return out
