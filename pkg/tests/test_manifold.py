import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfisac import manifold as mo
from cfisac import metrics
from cfisac import sysmodel as sm


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def instance(seed, tau, K, L, rho=5.0):
    rng = np.random.default_rng(seed)
    return mo.random_point(tau, K, rng), 10 ** rng.uniform(-1, 0, (L, K)), rho


def test_retract_examples():
    X = mo.random_point(3, 4, np.random.default_rng(0))
    assert np.allclose(mo.retract(X, np.zeros_like(X)), X)
    assert np.isclose(mo.retract(np.array([1.0 + 0j]), np.array([1j]))[0], (1 + 1j) / np.sqrt(2))
    with pytest.raises(mo.DegenerateRetraction):
        mo.retract(np.array([1.0 + 0j]), np.array([-1.0 + 0j]))


def test_retract_second_order():
    rng = np.random.default_rng(1)
    X = mo.random_point(3, 3, rng)
    Z = mo.project_tangent(X, rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    e1 = np.linalg.norm(mo.retract(X, 1e-2 * Z) - (X + 1e-2 * Z))
    e2 = np.linalg.norm(mo.retract(X, 5e-3 * Z) - (X + 5e-3 * Z))
    assert 3.5 < e1 / e2 < 4.5


def test_projection_properties():
    rng = np.random.default_rng(2)
    X = mo.random_point(4, 5, rng)
    U = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
    P = mo.project_tangent(X, U)
    assert np.allclose(mo.project_tangent(X, X), 0)
    assert np.allclose(mo.project_tangent(X, 1j * X), 1j * X)
    assert np.allclose(mo.project_tangent(X, P), P, atol=1e-12)
    assert np.allclose(np.real(X.conj() * P), 0, atol=1e-9)
    V = mo.project_tangent(X, rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
    assert abs(mo.metric(U - P, V)) < 1e-10


def test_metric_examples():
    U = np.array([[1j]])
    assert mo.metric(U, U) == 1.0
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.isclose(mo.metric(A, B), mo.metric(B, A))
    assert np.isclose(mo.metric(A, A), np.linalg.norm(A) ** 2)


def test_fd_oracle_on_linear_functional():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    F = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    out = mo.fd_gradient_oracle(F, None, None, func=lambda X: np.real(np.sum(A.conj() * X)))
    assert np.allclose(out, A, atol=1e-8)
    with pytest.raises(ValueError):
        mo.fd_gradient_oracle(F, None, None, step=1.0)


def test_fd_oracle_richardson_order():
    F, b, rho = instance(5, 2, 2, 2, rho=2.0)
    exact = mo.euclidean_gradient(F, b, rho)
    e1 = np.linalg.norm(mo.fd_gradient_oracle(F, b, rho, step=1e-4) - exact)
    e2 = np.linalg.norm(mo.fd_gradient_oracle(F, b, rho, step=5e-5) - exact)
    assert 3.0 < e1 / e2 < 5.0


@pytest.mark.parametrize("seed,tau,K,L,tol", [(0, 4, 1, 3, 1e-5), (1, 2, 3, 2, 1e-4), (2, 5, 6, 4, 1e-4)])
def test_gradient_matches_fd(seed, tau, K, L, tol):
    F, b, rho = instance(seed, tau, K, L)
    assert rel_err(mo.euclidean_gradient(F, b, rho), mo.fd_gradient_oracle(F, b, rho)) < tol


def test_gradient_fd_with_scaled_beta():
    F, b, rho = instance(6, 3, 3, 3)
    assert rel_err(mo.euclidean_gradient(F, 2 * b, rho), mo.fd_gradient_oracle(F, 2 * b, rho)) < 1e-4


def test_gradient_fd_with_distinct_pilot_power():
    F, b, rho = instance(7, 3, 4, 3)
    g = mo.euclidean_gradient(F, b, rho, rho_p=0.3)
    assert rel_err(g, mo.fd_gradient_oracle(F, b, rho, rho_p=0.3)) < 1e-4


def test_riemannian_gradient_is_tangent_and_ascent():
    F, b, rho = instance(8, 4, 5, 4)
    G = mo.riemannian_gradient(F, b, rho)
    assert np.allclose(np.real(F.conj() * G), 0, atol=1e-9)
    t = 1e-6
    deriv = (mo.objective(mo.retract(F, t * G), b, rho) - mo.objective(mo.retract(F, -t * G), b, rho)) / (2 * t)
    assert deriv > 0
    assert np.isclose(deriv, mo.metric(G, G), rtol=1e-4)


def test_armijo_on_circle_toy():
    # f(x) = -|x - 1|^2 on one circle entry, maximized at x = 1
    def f(X):
        return -float(np.sum(np.abs(X - 1) ** 2))
    X = np.array([[np.exp(2j)]])
    G = mo.project_tangent(X, -2 * (X - 1))
    cfg = mo.OptimizerConfig()
    alpha, X_new, fx = mo.armijo_step(X, G, f, cfg, grad=G)
    assert alpha > 0
    assert fx >= f(X) + cfg.sufficient_increase_coef * alpha * mo.metric(G, G)
    assert alpha in [cfg.initial_step * 0.5 ** m for m in range(cfg.m_max + 1)]


def test_armijo_zero_direction_and_failure():
    X = np.array([[1.0 + 0j]])
    cfg = mo.OptimizerConfig(m_max=3)
    alpha, X_new, _ = mo.armijo_step(X, np.array([[1j]]), lambda Z: -float(np.angle(Z[0, 0]) ** 2), cfg)
    assert alpha == 0.0 and np.array_equal(X_new, X)


def test_optimizer_config_validation():
    for bad in ({"eps": 0}, {"i_max": 0}, {"contraction": 1.0}):
        with pytest.raises(ValueError):
            mo.OptimizerConfig(**bad)


def test_optimize_trace_bookkeeping_and_feasibility():
    rng = np.random.default_rng(9)
    b = 10 ** rng.uniform(-1, 0, (5, 6))
    init = mo.random_point(3, 6, rng)
    seen = []
    res = mo.optimize_pilots(b, 10.0, mo.OptimizerConfig(i_max=60), init=init,
                             callback=lambda X: seen.append(np.max(np.abs(np.abs(X) - 1))))
    assert np.isclose(res.trace[0], mo.objective(init, b, 10.0))
    assert np.all(np.diff(res.trace) >= 0)
    assert max(seen) < 1e-12
    assert res.trace[-1] >= res.trace[0]


def test_reset_rule_forces_gradient_direction(monkeypatch):
    rng = np.random.default_rng(10)
    b = 10 ** rng.uniform(-1, 0, (4, 4))
    F0 = mo.random_point(3, 4, rng)
    calls = []
    real = mo.armijo_step

    def spy(F, direction, evaluate, cfg, grad=None, f0=None):
        calls.append(mo.metric(grad, direction))
        return real(F, direction, evaluate, cfg, grad, f0)

    monkeypatch.setattr(mo, "armijo_step", spy)
    mo.optimize_pilots(b, 5.0, mo.OptimizerConfig(i_max=30), init=F0)
    assert all(c > 0 for c in calls)


def test_gradient_small_at_converged_point():
    rng = np.random.default_rng(11)
    b = 10 ** rng.uniform(-1, 0, (4, 3))
    res = mo.optimize_pilots(b, 3.0, mo.OptimizerConfig(eps=1e-15, i_max=3000), tau=2, rng=rng)
    assert res.grad_norms[-1] <= 1e-3 * res.grad_norms[0]


def test_design_pilots_beats_single_run():
    cfg = sm.SystemConfig(L=12, K=8, tau=4)
    beta = sm.drop_network(cfg, np.random.default_rng(0))
    plain = mo.optimize_pilots(beta, cfg.rho_p, tau=4, rng=np.random.default_rng(1))
    dc = mo.DesignConfig(n_starts=2, stage=mo.OptimizerConfig(eps=1e-12, i_max=400, step_rule="adaptive"))
    best = mo.design_pilots(beta, cfg.rho_p, 4, np.random.default_rng(1), dc)
    assert np.allclose(np.abs(best.F), 1)
    assert mo.objective(best.F, beta, cfg.rho_p) >= plain.trace[-1]
    assert np.isclose(best.trace[-1], mo.objective(best.F, beta, cfg.rho_p))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_objective_invariant_to_column_phases(seed):
    F, b, rho = instance(seed, 3, 4, 3)
    th = np.exp(2j * np.pi * np.random.default_rng(seed + 1).random(4))
    assert np.isclose(mo.objective(F * th, b, rho), mo.objective(F, b, rho), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1.0))
def test_retraction_stays_on_manifold(seed, scale):
    rng = np.random.default_rng(seed)
    X = mo.random_point(3, 3, rng)
    Z = mo.project_tangent(X, scale * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))))
    assert np.allclose(np.abs(mo.retract(X, Z)), 1, atol=1e-12)


def test_wirtinger_gradient_matches_metrics_objective():
    F, b, rho = instance(12, 3, 3, 2)
    assert np.isclose(mo.objective(F, b, rho), metrics.sum_rate(F, b, rho))
