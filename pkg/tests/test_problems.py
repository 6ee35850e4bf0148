"""Tests for problem oracles, sampled verifiers, and serialization."""

import dataclasses

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smallgrad import problems as pb


def central_diff_grad(f, x, h=1e-6):
    """Independent gradient oracle: central finite differences."""
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# quadratics


def test_quadratic_gradient_matches_finite_differences():
    p = pb.random_quadratic(7, L=2.0, seed=1)
    rng = np.random.default_rng(11)
    x = rng.standard_normal(7)
    npt.assert_allclose(p.grad(x), central_diff_grad(p.value, x), rtol=1e-6, atol=1e-8)


def test_quadratic_optimum_is_stationary_and_minimal():
    p = pb.random_quadratic(9, L=1.5, seed=2)
    assert np.linalg.norm(p.grad(p.x_star)) <= pb.tol_zero(p.L, np.linalg.norm(p.x_star))
    npt.assert_allclose(p.value(p.x_star), p.f_star, rtol=0, atol=0)
    rng = np.random.default_rng(12)
    for _ in range(10):
        assert p.value(p.x_star + 0.1 * rng.standard_normal(9)) >= p.f_star


def test_quadratic_rejects_spectrum_above_L():
    with pytest.raises(ValueError, match="exceeds"):
        pb.make_quadratic(np.diag([1.0, 4.0]), np.zeros(2), L=3.0)


def test_quadratic_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        pb.make_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), L=2.0)


def test_quadratic_rejects_negative_curvature():
    with pytest.raises(ValueError, match="negative curvature"):
        pb.make_quadratic(np.diag([1.0, -0.5]), np.zeros(2), L=1.0)


def test_quadratic_singular_cases():
    Q = np.diag([1.0, 0.0])
    p = pb.make_quadratic(Q, np.array([1.0, 0.0]), L=1.0)
    npt.assert_allclose(p.x_star, [-1.0, 0.0], atol=1e-12)
    with pytest.raises(ValueError, match="range"):
        pb.make_quadratic(Q, np.array([0.0, 1.0]), L=1.0)


# ---------------------------------------------------------------------------
# log-sum-exp


def test_logsumexp_value_and_gradient():
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((5, 3))
    p = pb.make_logsumexp(rows, rho=0.7)
    npt.assert_allclose(p.value(np.zeros(3)), 0.7 * np.log(5.0), rtol=1e-15)
    x = rng.standard_normal(3)
    npt.assert_allclose(p.grad(x), central_diff_grad(p.value, x), rtol=1e-5, atol=1e-8)


def test_logsumexp_overflow_safe():
    p = pb.make_logsumexp(np.array([[1e4], [-1e4]]), rho=1.0)
    x = np.array([1.0])
    assert np.isfinite(p.value(x))
    assert np.all(np.isfinite(p.grad(x)))
    npt.assert_allclose(p.value(x), 1e4, rtol=1e-12)


def test_logsumexp_default_smoothness_constant():
    rng = np.random.default_rng(4)
    rows = rng.standard_normal((5, 3))
    rho = 0.7
    p = pb.make_logsumexp(rows, rho=rho)
    lam_max = np.linalg.eigvalsh(rows.T @ rows)[-1]
    assert p.L >= lam_max / rho
    npt.assert_allclose(p.L, 1.01 * lam_max / rho, rtol=2e-3)


# ---------------------------------------------------------------------------
# operator families


@settings(deadline=None)
@given(
    eta=st.floats(min_value=0.05, max_value=0.95),
    frac=st.floats(min_value=0.0, max_value=1.0),
)
def test_rotation_operator_identities(eta, frac):
    # inner product and norm of differences are exact multiples of ||u - v||
    alpha = frac * np.sqrt(eta * (1.0 - eta))
    spec = pb.LinearOperatorSpec(eta=eta, alpha=alpha, half_dim=3, offset=np.zeros(6))
    p = pb.make_rotation_operator(spec, L=1.0)
    rng = np.random.default_rng(5)
    u, v = rng.standard_normal(6), rng.standard_normal(6)
    dF = p.operator(u) - p.operator(v)
    du = u - v
    npt.assert_allclose(dF @ du, eta * (du @ du), rtol=1e-12, atol=1e-15)
    npt.assert_allclose(dF @ dF, (eta**2 + alpha**2) * (du @ du), rtol=1e-12, atol=1e-15)


def test_rotation_rejects_bilinear():
    spec = pb.LinearOperatorSpec(eta=0.0, alpha=1.0, half_dim=2, offset=np.zeros(4))
    with pytest.raises(ValueError, match="cocoercive"):
        pb.make_rotation_operator(spec, L=1.0)


def test_rotation_zero_point():
    rng = np.random.default_rng(6)
    b = rng.standard_normal(8)
    spec = pb.LinearOperatorSpec(eta=0.3, alpha=0.4, half_dim=4, offset=b)
    p = pb.make_rotation_operator(spec, L=1.0)
    assert np.linalg.norm(p.operator(p.u_star)) <= pb.tol_zero(1.0, np.linalg.norm(p.u_star))


def test_saddle_matches_rotation_pointwise():
    rng = np.random.default_rng(7)
    b1, b2 = rng.standard_normal(3), rng.standard_normal(3)
    eta, alpha, L = 0.4, 0.35, 1.0
    spec = pb.LinearOperatorSpec(eta=eta, alpha=alpha, half_dim=3, offset=np.concatenate([b1, b2]))
    rot = pb.make_rotation_operator(spec, L)
    sad = pb.make_saddle_quadratic(eta, alpha, b1, b2, L)
    npt.assert_allclose(rot.u_star, sad.u_star, rtol=0, atol=0)
    for _ in range(20):
        u = rng.standard_normal(6)
        npt.assert_allclose(sad.operator(u), rot.operator(u), rtol=1e-13, atol=1e-15)


def test_gradient_as_operator_is_cocoercive():
    p = pb.random_quadratic(6, L=1.0, seed=8)
    op = pb.gradient_as_operator(p)
    assert op.dim == 6 and op.L == 1.0
    npt.assert_allclose(op.u_star, p.x_star, rtol=0, atol=0)
    assert pb.verify_cocoercive(op, n_samples=300, radius=2.0, seed=0).passed


# ---------------------------------------------------------------------------
# sampled verifiers


def test_verifier_passes_on_shipped_instances():
    for p in (pb.random_quadratic(10, L=1.0, seed=9), pb.centered_logsumexp(6, 12, rho=0.8, seed=9)):
        rep = pb.verify_smooth_convex(p, n_samples=1000, radius=2.0, seed=1)
        assert rep.passed, rep.checks


def test_verifier_flags_understated_smoothness():
    p = pb.random_quadratic(6, L=1.0, seed=3)
    fake = dataclasses.replace(p, L=0.4)
    rep = pb.verify_smooth_convex(fake, n_samples=500, radius=2.0, seed=1)
    assert not rep.passed
    assert rep.checks["lipschitz"] > 0.1


def test_verifier_flags_concave_function():
    f = pb.SmoothProblem(
        dim=4,
        value=lambda x: -0.5 * float(x @ x),
        grad=lambda x: -x,
        L=1.0,
    )
    rep = pb.verify_smooth_convex(f, n_samples=200, radius=1.0, seed=2)
    assert not rep.passed
    assert rep.checks["interpolation"] > 0.01


def test_cocoercive_verifier_on_hard_boundary():
    # alpha^2 = L*eta - eta^2 makes the cocoercivity inequality an identity
    eta = 0.3
    alpha = np.sqrt(eta - eta * eta)
    spec = pb.LinearOperatorSpec(eta=eta, alpha=alpha, half_dim=2, offset=np.zeros(4))
    p = pb.make_rotation_operator(spec, L=1.0)
    rep = pb.verify_cocoercive(p, n_samples=500, radius=3.0, seed=3)
    assert rep.passed, rep.checks


def test_cocoercive_verifier_flags_expansive_map():
    bad = pb.OperatorProblem(dim=3, operator=lambda u: 2.0 * u, L=1.0)
    rep = pb.verify_cocoercive(bad, n_samples=200, radius=1.0, seed=4)
    assert not rep.passed
    assert rep.checks["cocoercive"] > 0.1


# ---------------------------------------------------------------------------
# reference optimum


def test_reference_optimum_recovers_known_minimizer():
    p = pb.centered_logsumexp(6, 12, rho=0.8, seed=2)
    q = pb.with_reference_optimum(p, np.ones(6))
    assert np.linalg.norm(q.x_star) <= 1e-8
    npt.assert_allclose(q.f_star, 0.8 * np.log(12.0), rtol=1e-13)


def test_reference_optimum_raises_when_budget_too_small():
    p = pb.random_quadratic(20, L=1.0, seed=5, lo_frac=1e-6)
    with pytest.raises(RuntimeError, match="stalled"):
        pb.with_reference_optimum(p, np.ones(20), budget=10)


# ---------------------------------------------------------------------------
# serialization


def sample_problems():
    rng = np.random.default_rng(10)
    quad = pb.random_quadratic(5, L=1.2, seed=10)
    lse = pb.make_logsumexp(rng.standard_normal((4, 3)), rho=0.5)
    spec = pb.LinearOperatorSpec(eta=0.25, alpha=0.3, half_dim=2, offset=rng.standard_normal(4))
    rot = pb.make_rotation_operator(spec, L=1.0)
    sad = pb.make_saddle_quadratic(0.25, 0.3, rng.standard_normal(2), rng.standard_normal(2), 1.0)
    return [quad, lse, rot, sad]


@pytest.mark.parametrize("p", sample_problems(), ids=lambda p: p.spec["kind"])
def test_problem_text_round_trip_is_exact(p):
    q = pb.problem_from_text(pb.problem_to_text(p))
    assert q.spec["kind"] == p.spec["kind"]
    assert q.dim == p.dim and q.L == p.L
    rng = np.random.default_rng(13)
    for _ in range(5):
        z = rng.standard_normal(p.dim)
        if isinstance(p, pb.SmoothProblem):
            npt.assert_array_equal(q.grad(z), p.grad(z))
            assert q.value(z) == p.value(z)
        else:
            npt.assert_array_equal(q.operator(z), p.operator(z))
    if isinstance(p, pb.SmoothProblem) and p.x_star is not None:
        npt.assert_array_equal(q.x_star, p.x_star)
        assert q.f_star == p.f_star
