import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from solvctrl.algebra import LieAlgebra
from solvctrl.catalog import example
from solvctrl.dynamics import (
    ControlLaw,
    ControlRange,
    ProductSystem,
    SemidirectLCS,
    SigmaASystem,
    build_semidirect,
    flow_B,
    rescale_control,
    semidirect_coordinates,
    semidirect_field_check,
    simulate_batch,
    solve_A,
    solve_A_direct,
    solve_product,
    solve_product_direct,
    solve_rescaled,
    trajectory,
)
from solvctrl.errors import (
    ANotNilpotent,
    ControlOutOfRange,
    DimensionMismatch,
    N0NotTrivial,
    NotADerivation,
)
from solvctrl.nilgroup import group_of
from solvctrl.verify import random_law

from conftest import h3_algebra


def ivp_solve(sys, x, law):
    """Reference: adaptive high-order integration, piece by piece."""
    x = np.asarray(x, dtype=float)
    for t, u in zip(law.durations, law.values):
        sol = scipy.integrate.solve_ivp(lambda _, y: sys.rhs(y, u), (0, t), x, method="DOP853", rtol=1e-12, atol=1e-12)
        x = sol.y[:, -1]
    return x


def test_control_law_basics():
    law = ControlLaw([1.0, 0.5], [[1, 0], [0, -1]])
    assert law.n_pieces == 2 and law.m == 2 and law.total_time == 1.5
    np.testing.assert_array_equal(law.value_at(1.2), [0, -1])
    assert law.reversed().values[0].tolist() == [0, -1]
    assert law.truncated(1.0) == ControlLaw([1.0], [[1, 0]])
    assert law.then(law).n_pieces == 4
    assert ControlLaw.from_records(law.to_records()) == law
    with pytest.raises(ControlOutOfRange):
        ControlLaw([0.0], [[1, 0]])
    with pytest.raises(DimensionMismatch):
        ControlLaw([1.0, 1.0], [[1, 0]])
    with pytest.raises(ControlOutOfRange):
        ControlLaw([1.0], [[2.0, 0]]).check_range(ControlRange((1.0, 1.0)))


def test_control_range_sampling(rng):
    r = ControlRange((1.0, 0.5))
    s = r.sample(rng, 200)
    assert r.contains(s)
    np.testing.assert_array_equal(r.clip([[3.0, -3.0]]), [[1.0, -0.5]])


def test_system_validation(h3):
    with pytest.raises(NotADerivation):
        SigmaASystem(h3, np.eye(3), [], np.eye(3)[:1], ControlRange((1.0,)))


def test_drift_only_flow_is_linear(h3_system, rng):
    x = rng.normal(size=3)
    law = ControlLaw.zero(2, 0.8)
    np.testing.assert_allclose(solve_A(h3_system, x, law), scipy.linalg.expm(0.8 * h3_system.D0) @ x, rtol=1e-12)


def test_abelian_is_affine(rng):
    # x' = D x + z u on R^2
    spec = example("abelian-2")
    sys = spec.model()
    x = rng.normal(size=2)
    law = ControlLaw([0.7], [[0.4]])
    D, z = sys.D0, sys.Zj[0]
    want = scipy.linalg.expm(0.7 * D) @ x + np.linalg.solve(D, (scipy.linalg.expm(0.7 * D) - np.eye(2)) @ (0.4 * z))
    np.testing.assert_allclose(solve_A(sys, x, law), want, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["heisenberg3", "filiform4", "euclid-like"]), st.integers(0, 2**32 - 1))
def test_solvers_match_reference(name, seed):
    sys = example(name).model()
    inner = sys.inner if hasattr(sys, "inner") else sys
    rng = np.random.default_rng(seed)
    law = random_law(rng, inner, max_time=1.5)
    x = rng.normal(size=inner.dim)
    ref = ivp_solve(inner, x, law)
    np.testing.assert_allclose(solve_A(inner, x, law), ref, atol=1e-8 * (1 + np.abs(ref).max()))
    np.testing.assert_allclose(solve_A_direct(inner, x, law), ref, atol=1e-8 * (1 + np.abs(ref).max()))


def test_flow_B_is_product_of_exponentials(h3_system, rng):
    law = random_law(rng, h3_system)
    Phi = flow_B(h3_system, law)
    M = np.eye(3)
    for t, u in zip(law.durations, law.values):
        M = scipy.linalg.expm(t * h3_system.D(u)) @ M
    np.testing.assert_allclose(Phi.matrix, M)
    assert Phi.residual <= 1e-9


def test_sigma_sign_convention(rng):
    g = h3_algebra()
    Dj = np.array([np.diag([1.0, -1.0, 0.0])])
    plus = SigmaASystem(g, np.diag([1.0, 1.0, 2.0]), Dj, [[1.0, 0, 0]], ControlRange((1.0,)), 1)
    minus = SigmaASystem(g, np.diag([1.0, 1.0, 2.0]), Dj, [[1.0, 0, 0]], ControlRange((1.0,)), -1)
    np.testing.assert_allclose(plus.D([0.5]), np.diag([1.5, 0.5, 2.0]))
    np.testing.assert_allclose(minus.D([0.5]), np.diag([0.5, 1.5, 2.0]))
    law = ControlLaw([0.6], [[0.5]])
    x = rng.normal(size=3)
    np.testing.assert_allclose(solve_A(minus, x, law), ivp_solve(minus, x, law), atol=1e-9)


def test_reversed_system_undoes_forward(h3_system, rng):
    law = random_law(rng, h3_system)
    x = rng.normal(size=3)
    y = solve_A(h3_system, x, law)
    back = solve_A(h3_system.reversed(), y, law.reversed())
    np.testing.assert_allclose(back, x, atol=1e-8)


def test_trajectory_endpoint(h3_system, rng):
    law = random_law(rng, h3_system)
    x = rng.normal(size=3)
    t, xs = trajectory(h3_system, x, law, samples_per_piece=5)
    assert t[-1] == pytest.approx(law.total_time)
    np.testing.assert_allclose(xs[-1], solve_A(h3_system, x, law), atol=1e-8)


def test_simulate_batch_matches_certified(h3_system, rng):
    B = 6
    durs = rng.uniform(0.1, 0.5, size=(B, 3))
    durs[0, 2] = 0.0
    vals = h3_system.range.sample(rng, (B, 3))
    x0 = rng.normal(size=(B, 3))
    end, path, times = simulate_batch(h3_system, x0, durs, vals, h=0.01, record=True)
    np.testing.assert_allclose(times[-1], durs.sum(axis=1))
    for i in range(B):
        keep = durs[i] > 0
        law = ControlLaw(durs[i][keep], vals[i][keep])
        np.testing.assert_allclose(end[i], solve_A(h3_system, x0[i], law), atol=1e-7)


def test_semidirect_reduction_euclid():
    spec = example("euclid-like")
    ps = build_semidirect(spec.semidirect())
    assert ps.V_dim == 1 and ps.inner.dim == 2
    np.testing.assert_allclose(ps.A, [[0.0]])
    np.testing.assert_allclose(ps.inner.D0, np.eye(2))
    np.testing.assert_allclose(ps.b, [[1.0], [0.0]])
    np.testing.assert_allclose(ps.inner.Zj, [[0, 0], [1, 0]])
    # ad(T) on span{X, Y}
    np.testing.assert_allclose(ps.inner.Dj[0], [[0, -1], [1, 0]])


def test_semidirect_guards(h3):
    with pytest.raises(N0NotTrivial) as err:
        semidirect_coordinates(h3, np.zeros((3, 3)))
    assert "N0 compact" in str(err.value)


def test_product_system_requires_nilpotent_A(h3_system):
    with pytest.raises(ANotNilpotent):
        ProductSystem(np.eye(1), np.zeros((2, 1)), h3_system)
    ProductSystem([[0.0, 1.0], [0.0, 0.0]], np.zeros((2, 2)), h3_system)


def test_semidirect_field_matches_group_law(rng):
    sd = example("euclid-like").semidirect()
    for _ in range(10):
        Y, Z, h, x = rng.normal(size=1), rng.normal(size=2), rng.normal(size=1), rng.normal(size=2)
        assert semidirect_field_check(sd, Y, Z, (h, x)) <= 1e-6


def test_product_solution(euclid_product, rng):
    for _ in range(5):
        law = random_law(rng, euclid_product.inner)
        v, x = rng.normal(size=1), rng.normal(size=2)
        a = solve_product(euclid_product, v, x, law)
        b = solve_product_direct(euclid_product, v, x, law)
        np.testing.assert_allclose(a[0], b[0], atol=1e-9)
        np.testing.assert_allclose(a[1], b[1], atol=1e-8)


def test_rescaling_constant_speed(h3_system, rng):
    u_alpha = ControlLaw([0.4, 0.6], [[1.0, 0.0], [-0.5, 0.5]])
    v = ControlLaw([1.0], [[2.0]])
    u, sigma = rescale_control(u_alpha, v, 3.0)
    assert u.total_time == pytest.approx(2.0)
    np.testing.assert_allclose(u.durations, [0.8, 1.2])
    assert sigma(1.0) == pytest.approx(2.0) and sigma.inverse(2.0) == pytest.approx(1.0)
    x = rng.normal(size=3)
    np.testing.assert_allclose(solve_rescaled(h3_system, x, u_alpha, v), solve_A(h3_system, x, u), atol=1e-8)


def test_rescaling_guards():
    u_alpha = ControlLaw([1.0], [[0.0, 0.0]])
    with pytest.raises(ControlOutOfRange):
        rescale_control(u_alpha, ControlLaw([1.0], [[5.0]]), 3.0)
    with pytest.raises(DimensionMismatch):
        rescale_control(u_alpha, ControlLaw([2.0], [[1.0]]), 3.0)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["heisenberg3", "filiform4"]), st.integers(0, 2**32 - 1))
def test_concatenation_cocycle(name, seed):
    sys = example(name).model()
    rng = np.random.default_rng(seed)
    u1, u2 = random_law(rng, sys), random_law(rng, sys)
    x = rng.normal(size=sys.dim)
    two_step = solve_A(sys, solve_A(sys, x, u1), u2)
    np.testing.assert_allclose(solve_A(sys, x, u1.then(u2)), two_step, atol=1e-8 * (1 + np.abs(two_step).max()))
    np.testing.assert_allclose(flow_B(sys, u1.then(u2)).matrix, flow_B(sys, u2).matrix @ flow_B(sys, u1).matrix, rtol=1e-12)
