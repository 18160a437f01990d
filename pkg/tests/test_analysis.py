import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solvctrl.algebra import LieAlgebra
from solvctrl.analysis import (
    StructuredField,
    control_set_estimate,
    cross_reachability,
    field_bracket,
    fiber_closure_check,
    full_pipeline,
    larc_check,
    reach_sample,
    seed_family_scan,
    seed_finder,
)
from solvctrl.catalog import example
from solvctrl.derivation import derivation_basis
from solvctrl.dynamics import ControlLaw, ControlRange, SemidirectLCS, SigmaASystem, solve_A
from solvctrl.errors import DetGapTooSmall

from conftest import h3_algebra, n4_algebra


def jacobian(fn, p, eps=1e-6):
    cols = []
    for k in range(p.size):
        e = np.zeros_like(p)
        e[k] = eps
        cols.append((fn(p + e) - fn(p - e)) / (2 * eps))
    return np.array(cols).T


def random_field(rng, g, p):
    B = derivation_basis(g)
    A = np.triu(rng.normal(size=(p, p)), 1)
    return StructuredField(A, rng.normal(size=p), np.tensordot(rng.normal(size=len(B)), B, axes=1), rng.normal(size=g.dim))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["h3", "n4"]), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_field_bracket_matches_jacobian_oracle(name, p, seed):
    g = {"h3": h3_algebra, "n4": n4_algebra}[name]()
    rng = np.random.default_rng(seed)
    f, h = random_field(rng, g, p), random_field(rng, g, p)
    pt = rng.normal(size=p + g.dim)
    F = lambda s: f.evaluate(g, s)
    H = lambda s: h.evaluate(g, s)
    want = jacobian(H, pt) @ F(pt) - jacobian(F, pt) @ H(pt)
    got = field_bracket(g, f, h).evaluate(g, pt)
    np.testing.assert_allclose(got, want, atol=1e-5 * (1 + np.abs(want).max()))


def test_larc_examples(h3_system, euclid_product):
    rep = larc_check(h3_system)
    assert rep.larc and rep.strong and rep.state_dim == 3
    assert larc_check(euclid_product).larc
    dead = SigmaASystem(h3_algebra(), np.diag([1.0, 1.0, 2.0]), [], np.zeros((1, 3)), ControlRange((1.0,)))
    rep = larc_check(dead)
    assert not rep.larc and rep.L0_dim_at_points[0][1] == 0


def test_larc_rank_drops_off_origin():
    # x' = x on R^1 with no control: rank 0 at the origin, 1 elsewhere
    sys = SigmaASystem(LieAlgebra.abelian(1), [[1.0]], [], [[0.0]], ControlRange((1.0,)))
    rep = larc_check(sys, [[0.0], [1.0]])
    assert [r for _, r in rep.L_dim_at_points] == [0, 1]


def test_seed_constant_control(h3_system):
    cert = seed_finder(h3_system, ControlLaw.constant([1.0, 0.0], 1.0))
    # x' = x + e1 along e1 has the periodic point -e1 (an equilibrium)
    np.testing.assert_allclose(cert.x_star, [-1.0, 0.0, 0.0], atol=1e-9)
    assert cert.periodicity_residual <= 1e-7


def test_seed_zero_law_is_origin(h3_system):
    cert = seed_finder(h3_system, ControlLaw.zero(2, 1.0))
    assert not np.any(cert.x_star)
    assert cert.det_gap == pytest.approx(abs((1 - np.e) ** 2 * (1 - np.e**2)))


def test_seed_is_periodic(h3_system):
    law = ControlLaw([0.3, 0.7], [[0.5, -0.2], [-0.1, 0.4]])
    cert = seed_finder(h3_system, law)
    np.testing.assert_allclose(solve_A(h3_system, cert.x_star, law), cert.x_star, atol=1e-8)


def test_resonant_horizon():
    sys = SigmaASystem(LieAlgebra.abelian(2), [[0, -2 * np.pi], [2 * np.pi, 0]], [], [[1.0, 0.0]], ControlRange((1.0,)))
    with pytest.raises(DetGapTooSmall):
        seed_finder(sys, ControlLaw.zero(1, 1.0))
    scan = seed_family_scan(sys, 1.0, 4)
    assert scan.certificates == [] and scan.report["status"] == "resonant"


def test_seed_scan_reproducible(h3_system):
    a = seed_family_scan(h3_system, 1.0, 4, rng_seed=3)
    b = seed_family_scan(h3_system, 1.0, 4, rng_seed=3)
    assert len(a.certificates) == 4
    for x, y in zip(a.certificates, b.certificates):
        np.testing.assert_array_equal(x.x_star, y.x_star)


def test_reach_sample_shape_and_determinism(h3_system):
    a = reach_sample(h3_system, np.zeros(3), budget=50, rng_seed=1)
    b = reach_sample(h3_system, np.zeros(3), budget=50, rng_seed=1)
    assert a.points.shape == (51, 3) and a.law_ids[0] == -1
    np.testing.assert_array_equal(a.points, b.points)
    back = reach_sample(h3_system, np.zeros(3), "backward", budget=50, rng_seed=1)
    assert not np.array_equal(back.points[1:], a.points[1:])
    with pytest.raises(ValueError):
        reach_sample(h3_system, np.zeros(3), "sideways", budget=5)


def test_cross_reachability_trivial_and_short(h3_system):
    r = cross_reachability(h3_system, np.zeros(3), np.full(3, 0.01), ball=0.05)
    assert r.found and r.shots == 0
    target = solve_A(h3_system, np.zeros(3), ControlLaw([0.5], [[1.0, 0.0]]))
    r = cross_reachability(h3_system, np.zeros(3), target, ball=0.05, budget=20_000, rng_seed=2)
    assert r.found and r.status == "verified"
    end = solve_A(h3_system, np.zeros(3), r.law)
    assert np.linalg.norm(end - target) <= 0.05


def test_cross_reachability_budget_exhausted(h3_system):
    r = cross_reachability(h3_system, np.zeros(3), np.array([50.0, 0, 0]), ball=0.01, budget=64, batch=32)
    assert not r.found and r.status == "unverified" and r.shots == 64


def test_control_set_labels(h3_system):
    est = control_set_estimate(h3_system, [np.zeros(3)], budget=200)
    assert est.label == "UNIQUE-CONSISTENT" and len(est.inliers) >= 1
    est = control_set_estimate(h3_system, [np.zeros(3), np.array([-0.1, 0, 0])], budget=100, verify_pairs=False)
    assert est.label == "PAIRS-NOT-CHECKED"


def test_fiber_closure_small_grid(euclid_product):
    rep = fiber_closure_check(euclid_product, np.zeros(2), [[0.5]], ball=0.1, budget=20_000)
    assert rep.fraction == 1.0 and rep.details[0]["shifted_return"]


def test_pipeline_stops_on_n0():
    g = h3_algebra()
    sd = SemidirectLCS(g, np.zeros((3, 3)), np.eye(3)[:2], ControlRange((1.0, 1.0)))
    rep = full_pipeline(sd)
    assert not rep.ok and rep.stopped_at == "N0 compact (n0 = 0)"
