"""Drift evaluation, Jacobians, Lyapunov functions, affine conjugation."""

import numpy as np
import pytest

import oracles
from sde_lab import bumps, model
from sde_lab.model import (
    GeneralModel,
    InvalidDirectionError,
    ModelParams,
    build_axis_aligned,
    build_general,
    embed_to_dim,
    embedded_nu,
    embedded_V,
    eval_general_V,
    eval_mu,
    eval_mu_jacobian,
    eval_nu,
    eval_nu_jacobian,
    eval_U,
    eval_U_grad,
    frobenius_bound_check,
    householder_to,
    log_growth_rhs,
    verify_jacobian_growth,
    verify_lyapunov,
    verify_model_bounds,
)


@pytest.fixture(scope="module")
def axis():
    return build_axis_aligned(ModelParams())


@pytest.fixture(scope="module")
def general(axis):
    return build_general(axis)


def test_params_validation():
    with pytest.raises(ValueError, match="integer >= 2"):
        ModelParams(n=1)
    with pytest.raises(ValueError, match="tau < T"):
        ModelParams(tau=1.0, T=1.0)
    with pytest.raises(ValueError, match="dimension must be >= 5"):
        ModelParams(d=4)
    with pytest.raises(ValueError, match="noise dimension"):
        ModelParams(m=0)
    with pytest.raises(ValueError, match="p >= 1"):
        ModelParams(p=0.5)
    with pytest.raises(ValueError, match="q >= 2"):
        ModelParams(n=4, p=1.0, q=7.0)
    with pytest.raises(ValueError, match="length d"):
        ModelParams(d=5, v=np.zeros(4))
    with pytest.raises(InvalidDirectionError):
        ModelParams(delta=np.zeros(5))


def test_params_defaults():
    prm = ModelParams(n=3, p=2.0)
    assert prm.q == 12.0  # 2*p*n
    assert np.array_equal(prm.v, np.zeros(5))
    expected = np.zeros(5)
    expected[3] = 1.0
    assert np.array_equal(prm.delta, expected)
    assert not prm.v.flags.writeable


def test_envelope_constant_formula():
    m4 = build_axis_aligned(ModelParams(n=4))
    assert m4.C >= 1.0
    assert m4.kappa5 == pytest.approx(2.0 + 40.0 * m4.C, rel=1e-14)
    m2 = build_axis_aligned(ModelParams(n=2))
    assert m2.kappa5 == pytest.approx(2.0 + 24.0 * m2.C, rel=1e-14)


def test_nu_at_origin(axis):
    assert np.array_equal(eval_nu(axis, np.zeros(5)), [1, 0, 0, 0, 0])


def test_nu_outside_supports(axis):
    # x1 outside both supports kills components 3..5
    for x1 in (-1.0, 0.0, 1.0, 2.0):
        x = np.array([x1, 2.0, 3.0, 4.0, 5.0])
        out = eval_nu(axis, x)
        assert out[0] == 1.0 and out[1] == 0.0
        assert np.array_equal(out[2:], [0.0, 0.0, 0.0])


def test_nu_drift_component_values(axis):
    out = eval_nu(axis, np.array([0.25, 1.0, 0.0, 0.0, 0.0]))
    assert np.array_equal(out, [1.0, 0.0, bumps.eval(axis.g, 0.25, 1), 0.0, 0.0])
    # a point inside supp f with every product term active
    x = np.array([0.7, 2.0, 0.5, 1.5, -0.5])
    fx = bumps.eval(axis.f, 0.7, 0)
    out = eval_nu(axis, x)
    assert out[3] == pytest.approx(fx * 1.5 * (-0.5), rel=1e-14)
    assert out[4] == pytest.approx(fx * (0.5**4 - 1.5**2), rel=1e-14)


def test_nu_batched_evaluation(axis):
    rng = np.random.default_rng(1)
    xs = rng.uniform(-2, 2, size=(7, 3, 5))
    batched = eval_nu(axis, xs)
    for i in range(7):
        for j in range(3):
            assert np.array_equal(batched[i, j], eval_nu(axis, xs[i, j]))


def test_jacobian_zero_at_origin(axis):
    assert np.array_equal(eval_nu_jacobian(axis, np.zeros(5)), np.zeros((5, 5)))


def test_jacobian_first_two_rows_vanish(axis):
    rng = np.random.default_rng(2)
    x = rng.uniform(-3, 3, size=(50, 5))
    jac = eval_nu_jacobian(axis, x)
    assert np.all(jac[:, 0, :] == 0.0)
    assert np.all(jac[:, 1, :] == 0.0)


def test_jacobian_matches_finite_differences(axis):
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=5)
        step = 1e-6 * (1.0 + np.linalg.norm(x))
        fd = oracles.fd_jacobian(lambda y: eval_nu(axis, y), x, step)
        exact = eval_nu_jacobian(axis, x)
        tol = 1e-5 * np.maximum(1.0, np.abs(exact))
        assert np.all(np.abs(fd - exact) <= tol)


def test_U_at_origin(axis):
    assert eval_U(axis, np.zeros(5)) == 2.0


def test_U_dominates_norm(axis):
    rng = np.random.default_rng(4)
    x = rng.uniform(-5, 5, size=(500, 5))
    assert np.all(np.linalg.norm(x, axis=1) <= eval_U(axis, x))


def test_U_grad_matches_finite_differences(axis):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=5)
        for p, q in ((1.0, 8.0), (2.0, 16.0)):
            # wide step: the value is O(100), so a tiny step drowns the
            # small gradient components in cancellation noise
            fd = oracles.fd_jacobian(lambda y: eval_U(axis, y, p, q), x, 1e-3)
            exact = eval_U_grad(axis, x, p, q)
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-8)


def test_embedding_dimension_five_is_identity(axis):
    drift, V, sigma0 = embed_to_dim(axis)
    x = np.array([0.7, 1.0, -0.5, 0.3, 2.0])
    assert np.array_equal(drift(x), eval_nu(axis, x))
    assert V(x) == eval_U(axis, x) + 1.0
    assert np.array_equal(sigma0, [0, 1, 0, 0, 0])


def test_embedding_dimension_seven():
    axis7 = build_axis_aligned(ModelParams(d=7))
    drift, V, _ = embed_to_dim(axis7)
    x = np.array([0.7, 1.0, -0.5, 0.3, 2.0, 3.0, 3.0])
    out = drift(x)
    assert np.array_equal(out[5:], [0.0, 0.0])
    assert np.array_equal(out[:5], eval_nu(axis7, x[:5]))
    assert V(x) == eval_U(axis7, x[:5]) + 18.0 + 1.0


def test_embedding_dimension_six_origin():
    axis6 = build_axis_aligned(ModelParams(d=6))
    assert embedded_V(axis6, np.zeros(6)) == 3.0


def test_householder_swaps_coordinates():
    target = np.zeros(5)
    target[4] = 1.0
    A = householder_to(target)
    expected = np.eye(5)
    expected[3, 3] = expected[4, 4] = 0.0
    expected[3, 4] = expected[4, 3] = 1.0
    # the reflection arithmetic leaves ~1e-16 residue on the swapped block
    assert np.allclose(A, expected, atol=1e-15)


def test_householder_identity_when_aligned():
    target = np.zeros(5)
    target[3] = 1.0
    assert np.array_equal(householder_to(target), np.eye(5))


def test_build_general_invariants():
    rng = np.random.default_rng(6)
    d = 6
    prm = ModelParams(
        d=d, v=rng.uniform(-1, 1, d), delta=rng.uniform(-1, 1, d)
    )
    gm = build_general(build_axis_aligned(prm))
    eye = np.eye(d)
    assert np.allclose(gm.A.T @ gm.A, eye, atol=1e-12)
    assert np.allclose(gm.B @ gm.Binv, eye, atol=1e-12)
    u = np.zeros(d)
    u[3] = 1.0
    dnorm = np.linalg.norm(prm.delta)
    assert np.allclose(gm.A @ u, prm.delta / dnorm, atol=1e-12)
    x = rng.standard_normal((100, d))
    got = np.linalg.norm(x @ gm.B.T, axis=1)
    want = dnorm * np.linalg.norm(x, axis=1)
    assert np.allclose(got, want, rtol=1e-12)
    # noise enters only through column 1 = B applied to the 2nd unit vector
    sigma0 = np.zeros(d)
    sigma0[1] = 1.0
    assert np.allclose(gm.sigma[:, 0], gm.B @ sigma0, atol=1e-14)
    assert gm.sigma.shape == (d, prm.m)


def test_build_general_identity_case(general):
    # default delta = u, v = 0: the conjugation is trivial
    assert np.array_equal(general.A, np.eye(5))
    assert np.array_equal(general.B, np.eye(5))
    x = np.array([0.7, 1.0, -0.5, 0.3, 2.0])
    assert np.array_equal(eval_mu(general, x), embedded_nu(general.base, x))


def test_eval_mu_conjugation_identity():
    rng = np.random.default_rng(7)
    d = 5
    prm = ModelParams(d=d, v=rng.uniform(-1, 1, d), delta=rng.uniform(-1, 1, d))
    gm = build_general(build_axis_aligned(prm))
    for _ in range(50):
        y = rng.uniform(-1, 1, d)
        x = gm.B @ y + prm.v
        assert np.allclose(eval_mu(gm, x), gm.B @ embedded_nu(gm.base, y), atol=1e-9)
    assert np.allclose(eval_mu(gm, prm.v), gm.B @ embedded_nu(gm.base, np.zeros(d)))


def test_eval_mu_jacobian_chain_rule():
    rng = np.random.default_rng(8)
    d = 5
    prm = ModelParams(d=d, v=rng.uniform(-1, 1, d), delta=rng.uniform(-1, 1, d))
    gm = build_general(build_axis_aligned(prm))
    for _ in range(5):
        x = rng.uniform(-1.5, 1.5, d)
        step = 1e-6 * (1.0 + np.linalg.norm(x))
        fd = oracles.fd_jacobian(lambda z: eval_mu(gm, z), x, step)
        exact = eval_mu_jacobian(gm, x)
        tol = 1e-5 * np.maximum(1.0, np.abs(exact))
        assert np.all(np.abs(fd - exact) <= tol)


def test_general_V_dominates_norm():
    rng = np.random.default_rng(9)
    d = 6
    prm = ModelParams(d=d, v=rng.uniform(-1, 1, d), delta=rng.uniform(-1, 1, d))
    gm = build_general(build_axis_aligned(prm))
    x = rng.uniform(-3, 3, size=(500, d))
    assert np.all(np.linalg.norm(x, axis=1) <= eval_general_V(gm, x))


def test_log_growth_rhs_matches_direct_formula():
    # log_kappa = 0 is the kappa = 1 envelope: kappa(1 + r^kappa) = 1 + r
    for r in (0.5, 1.0, 2.0):
        got = log_growth_rhs(0.0, np.array([np.log(r)]))[0]
        assert got == pytest.approx(np.log(1.0 + r), rel=1e-14)


def test_log_growth_rhs_saturates():
    out = log_growth_rhs(800.0, np.array([np.log(2.0), -np.log(2.0), 0.0]))
    assert out[0] == np.inf  # growing direction saturates up
    assert out[1] == 800.0  # shrinking direction: kappa * (1 + 0)
    assert out[2] == pytest.approx(800.0 + np.log(2.0))


def test_verify_jacobian_growth_passes(axis, general):
    rep = verify_jacobian_growth(axis, trials=3000, box_radius=5.0, seed=0)
    assert rep.passed
    assert rep.params["max_ratio"] <= 1.0
    rep = verify_jacobian_growth(general, trials=3000, box_radius=5.0, seed=1)
    assert rep.passed


def test_verify_lyapunov_passes(axis, general):
    rep = verify_lyapunov(axis, trials=3000, box_radius=5.0, z_radius=5.0, seed=0)
    assert rep.passed
    assert rep.params["norm_le_V"]
    rep = verify_lyapunov(general, trials=3000, box_radius=5.0, z_radius=5.0, seed=1)
    assert rep.passed


def test_frobenius_bound_check():
    assert frobenius_bound_check(np.eye(5), 1000).passed
    assert frobenius_bound_check(np.zeros((5, 5)), 100).passed
    rng = np.random.default_rng(10)
    assert frobenius_bound_check(rng.standard_normal((5, 5)), 1000).passed


def test_verify_model_bounds_bundle(general):
    rep = verify_model_bounds(general, trials=2000, box_radius=5.0, z_radius=5.0)
    assert rep.passed
    assert rep.check == "model_bounds"
    assert len(rep.params) == 5  # four inequality checks plus the matrix-norm one
    assert rep.grid_size == 5 * 2000  # total samples across sub-checks


def test_general_model_params_passthrough(general):
    assert isinstance(general, GeneralModel)
    assert general.params is general.base.params
    assert np.isfinite(general.log_kappa)
