import numpy as np
import pytest
from hypothesis import given, strategies as st

from proxkit.core import NonFiniteError, StopReason
from proxkit.objective import LassoProblem, composite_value, lipschitz_constant
from proxkit.prox import prox_step
from proxkit.solvers import (
    AdamConfig,
    AdamL1,
    SolverConfig,
    StepController,
    adam_l1_solve,
    check_stop,
    gd_solve,
    prox_gd_constant_solve,
    prox_gd_variable_solve,
    step_controller_update,
)
from proxkit.data import SyntheticSpec, generate_synthetic

norms = st.one_of(st.just(0.0), st.floats(1e-6, 10))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mu0=0.9, mu1=0.95)
    with pytest.raises(ValueError):
        SolverConfig(lambda0=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        AdamConfig(beta1=1.0)


# -- stopping rule ------------------------------------------------------------------


def test_check_stop_examples():
    cfg = SolverConfig()
    assert check_stop(3, 1.0, 0.9, 0.0005, cfg) is StopReason.GRAD_TOL
    assert check_stop(1, 9.0, 9.5, 1.0, cfg) is StopReason.NON_MONOTONE
    assert check_stop(1, 9.0, 9.0, 1.0, cfg) is None
    assert check_stop(999, 9.0, 8.0, 1.0, cfg) is StopReason.MAX_ITERS


def test_check_stop_precedence():
    cfg = SolverConfig(max_iters=5)
    assert check_stop(4, 1.0, 2.0, 0.0, cfg) is StopReason.GRAD_TOL
    assert check_stop(4, 1.0, 2.0, 1.0, cfg) is StopReason.NON_MONOTONE
    assert check_stop(4, 1.0, 2.0, 1.0, cfg, monotone=False) is StopReason.MAX_ITERS


# -- step controller -------------------------------------------------------------------


def test_controller_shrink_example():
    s = StepController(0.1, 0.99, 0.95, 0.99)
    # |dx| = 0.1, |dg| = 2
    new = step_controller_update(s, np.zeros(2), np.array([0.1, 0.0]), np.zeros(2), np.array([0.0, 2.0]))
    assert new == pytest.approx(0.0475, rel=1e-14)
    assert s.k == 1


def test_controller_growth_example():
    s = StepController(0.1, 0.99, 0.95, 0.99)
    new = s.update_norms(0.1, 0.5)
    assert new == pytest.approx(0.2, rel=1e-14)


def test_controller_degenerate_pair_grows():
    s = StepController(0.3, eta_rho=0.5)
    s.k = 2
    x, g = np.ones(3), np.full(3, 2.0)
    assert s.update(x, x, g, g) == pytest.approx(0.3 + 0.3 * 0.25)


@given(
    st.floats(1e-6, 50),
    st.lists(st.tuples(norms, norms), min_size=1, max_size=40),
)
def test_controller_invariants(lambda0, pairs):
    s = StepController(lambda0)
    for dx, dg in pairs:
        old, k = s.current_lambda, s.k
        if dx == 0 and dg > 0:
            continue  # a zero move with a gradient change cannot come from a prox step
        new = s.update_norms(dx, dg)
        assert new > 0
        eta = 0.99**k
        if s.last_shrunk:
            assert new < old
            assert new * dg == pytest.approx(0.95 * dx, rel=1e-12)
            assert new * dg < 0.99 * dx
        else:
            assert new <= old * (1 + eta) + eta


# -- plain gradient descent -------------------------------------------------------------


def test_gd_half_square_one_step():
    p = LassoProblem([[1.0]], [0.0], 0.0)
    r = gd_solve(p, SolverConfig(x0=np.array([1.0]), lipschitz_mode="analytic"))
    assert r.final_x.tolist() == [0.0]
    assert r.iterations == 1
    assert r.stop_reason is StopReason.GRAD_TOL


def test_gd_from_minimiser_stops_at_iteration_zero(rng):
    A = rng.standard_normal((20, 4))
    x = rng.standard_normal(4)
    r = gd_solve(LassoProblem(A, A @ x, 0.0), SolverConfig(x0=x, lipschitz_mode="analytic"))
    assert r.stop_reason is StopReason.GRAD_TOL
    assert r.trace.k == [0]
    assert r.iterations == 1


def test_gd_requires_smooth_problem():
    with pytest.raises(ValueError):
        gd_solve(LassoProblem(np.eye(2), [1, 1], 0.1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gd_nonfinite_is_reported():
    # a step far beyond 2/L diverges until overflow
    p = LassoProblem(np.diag([1.0, 30.0]), [1.0, 1.0], 0.0)
    with pytest.raises(NonFiniteError) as info:
        gd_solve(p, SolverConfig(x0=np.array([1e300, 1e300]), grad_tol=0, max_iters=50, lipschitz_mode="analytic"))
    assert info.value.iteration >= 0


# -- proximal solvers -------------------------------------------------------------------


@pytest.mark.parametrize("solver", [prox_gd_constant_solve, prox_gd_variable_solve])
def test_zero_targets_stop_immediately(solver, rng):
    p = LassoProblem(rng.standard_normal((30, 5)), np.zeros(30), 0.01)
    r = solver(p)
    assert r.stop_reason is StopReason.GRAD_TOL
    assert r.iterations == 1
    assert np.all(r.final_x == 0)


def test_result_invariants(rng, make_problem):
    for _ in range(10):
        p = make_problem(rng)
        for solver in (prox_gd_constant_solve, prox_gd_variable_solve):
            r = solver(p, SolverConfig(max_iters=300))
            assert r.iterations == r.trace.k[-1] + 1
            assert r.trace.k == list(range(len(r.trace)))
            assert all(lam > 0 for lam in r.trace.step)
            if r.stop_reason is StopReason.GRAD_TOL:
                assert r.final_grad_norm < 1e-3
            if r.stop_reason is StopReason.NON_MONOTONE:
                # the better, earlier point is returned
                assert r.final_objective == r.trace.objective[-1]


def test_constant_step_is_monotone_with_analytic_constant(rng, make_problem):
    for _ in range(20):
        p = make_problem(rng)
        r = prox_gd_constant_solve(p, SolverConfig(lipschitz_mode="analytic", monotone_stop=False, max_iters=400))
        F = np.array(r.trace.objective)
        assert np.all(np.diff(F) <= 4 * np.finfo(float).eps * np.abs(F[:-1]))


def test_constant_step_uses_reciprocal_lipschitz(rng, make_problem):
    p = make_problem(rng)
    r = prox_gd_constant_solve(p, SolverConfig(max_iters=5, grad_tol=0, monotone_stop=False))
    assert r.trace.step == [pytest.approx(1 / lipschitz_constant(p))] * 5
    assert r.lipschitz == pytest.approx(lipschitz_constant(p))


def test_variable_step_trace_matches_controller(rng, make_problem):
    p = make_problem(rng, d=8, m=40)
    cfg = SolverConfig(max_iters=50, grad_tol=0, monotone_stop=False, record_iterates=True)
    r = prox_gd_variable_solve(p, cfg)
    xs, lams = r.trace.iterates, r.trace.step
    ctl = StepController.from_config(cfg)
    from proxkit.objective import smooth_gradient

    for k in range(len(xs) - 1):
        assert lams[k] == ctl.current_lambda
        np.testing.assert_array_equal(xs[k + 1], prox_step(p, xs[k], lams[k]))
        ctl.update(xs[k], xs[k + 1], smooth_gradient(p, xs[k]), smooth_gradient(p, xs[k + 1]))


def test_fixed_point_residual_on_gradtol_stop(rng):
    hits = 0
    for _ in range(10):
        A = rng.standard_normal((60, 6))
        p = LassoProblem(A, A @ rng.standard_normal(6) + 0.1 * rng.standard_normal(60), 1e-6)
        for solver in (prox_gd_constant_solve, prox_gd_variable_solve):
            r = solver(p, SolverConfig(lipschitz_mode="analytic", monotone_stop=False, max_iters=5000))
            if r.stop_reason is not StopReason.GRAD_TOL:
                continue
            hits += 1
            lam = r.final_step
            assert np.linalg.norm(r.final_x - prox_step(p, r.final_x, lam)) <= 10 * 1e-3 * lam
    assert hits >= 10


def test_determinism(rng, make_problem):
    p = make_problem(rng, d=10, m=40)
    for solver in (prox_gd_constant_solve, prox_gd_variable_solve, adam_l1_solve):
        a, b = solver(p), solver(p)
        assert a.iterations == b.iterations and a.stop_reason is b.stop_reason
        np.testing.assert_array_equal(a.final_x, b.final_x)
        assert a.trace.objective == b.trace.objective and a.trace.step == b.trace.step


def test_support_recovery_on_synthetic_data():
    spec = SyntheticSpec(d=100, m=10_000, s=10, seed=3)
    ds = generate_synthetic(spec)
    for solver in (prox_gd_constant_solve, prox_gd_variable_solve):
        r = solver(ds.problem)
        top = np.argsort(-np.abs(r.final_x))[: spec.s]
        assert np.mean(top < spec.s) >= 0.8


def test_dist_to_opt_only_with_reference(rng, make_problem):
    p = make_problem(rng)
    assert all(v is None for v in prox_gd_constant_solve(p, SolverConfig(max_iters=5)).trace.dist_to_opt)
    ref = np.zeros(p.d)
    tr = prox_gd_constant_solve(p, SolverConfig(max_iters=5), x_ref=ref).trace
    assert tr.dist_to_opt[0] == 0.0


# -- Adam --------------------------------------------------------------------------------


def test_adam_fixed_point_at_zero(rng):
    p = LassoProblem(rng.standard_normal((10, 3)), np.zeros(10), 0.01)
    r = adam_l1_solve(p, SolverConfig(grad_tol=0, max_iters=20))
    assert np.all(r.final_x == 0)
    assert r.stop_reason is StopReason.MAX_ITERS


def test_adam_first_step_has_step_magnitude():
    opt = AdamL1(3)
    g = np.array([0.3, -20.0, 1e-3])
    x1 = opt.step(np.zeros(3), g)
    # m_hat = g, v_hat = g^2, so the move is step * g / (|g| + eps)
    np.testing.assert_allclose(x1, -0.001 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    np.testing.assert_allclose(np.abs(x1), 0.001, rtol=1e-4)


def test_adam_second_moment_nonnegative(rng):
    opt = AdamL1(5)
    x = np.zeros(5)
    for _ in range(200):
        x = opt.step(x, rng.standard_normal(5) * 10)
        assert np.all(opt.v >= 0)


def test_adam_ignores_monotone_stop_and_records_step(rng, make_problem):
    p = make_problem(rng)
    r = adam_l1_solve(p, SolverConfig(max_iters=200, grad_tol=0), AdamConfig(step=0.05))
    assert r.stop_reason is StopReason.MAX_ITERS
    assert set(r.trace.step) == {0.05}
    assert r.iterations == 200
