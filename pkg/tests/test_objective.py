import numpy as np
import pytest

from proxkit.objective import (
    LassoProblem,
    PowerIterationError,
    composite_value,
    l1_subgradient,
    lipschitz_constant,
    reg_value,
    smooth_gradient,
    smooth_value,
)
from proxkit.core import DimensionError


def jacobi_eigenvalues(S, sweeps=50):
    """Cyclic Jacobi rotations; independent of the power-iteration path."""
    S = np.array(S, dtype=float)
    n = S.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum((S - np.diag(np.diag(S))) ** 2))
        if off < 1e-15:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(S[p, q]) < 1e-300:
                    continue
                theta = (S[q, q] - S[p, p]) / (2 * S[p, q])
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 1 / (2 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1))
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                S = J.T @ S @ J
    return np.sort(np.diag(S))


def central_difference(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


I2 = np.eye(2)


def test_smooth_value_examples():
    assert smooth_value(LassoProblem(I2, [0, 0], 0.01), [1, 1]) == 0.5
    assert smooth_value(LassoProblem(I2, [1, 1], 0.01), [0, 0]) == 0.5
    A = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]])
    x = np.array([0.5, -2.0])
    assert smooth_value(LassoProblem(A, A @ x, 0.1), x) == 0.0


def test_smooth_gradient_examples():
    np.testing.assert_allclose(smooth_gradient(LassoProblem(I2, [0, 0], 0.01), [2, 4]), [1, 2])
    A = np.array([[1.0, 2.0], [3.0, 1.0]])
    x = np.array([1.0, -1.0])
    np.testing.assert_array_equal(smooth_gradient(LassoProblem(A, A @ x, 0.1), x), [0, 0])


def test_reg_value_examples():
    assert reg_value(LassoProblem(np.eye(2), [0, 0], 0.01), [0, 0]) == 0
    assert reg_value(LassoProblem(np.eye(3), [0, 0, 0], 0.5), [1, -2, 3]) == 3.0
    assert reg_value(LassoProblem(np.eye(1), [0], 1.0), [-1]) == 1.0


def test_composite_value_examples(rng, make_problem):
    assert composite_value(LassoProblem(I2, [0, 0], 0.3), [0, 0]) == 0
    assert composite_value(LassoProblem(I2, [0, 0], 1.0), [1, 1]) == 2.5
    p = make_problem(rng)
    x = rng.standard_normal(p.d)
    assert composite_value(p, x) >= smooth_value(p, x)


def test_l1_subgradient_examples():
    p3 = LassoProblem(np.eye(3), np.zeros(3), 0.01)
    np.testing.assert_array_equal(l1_subgradient(LassoProblem(I2, [0, 0], 0.01), [0, 0]), [0, 0])
    np.testing.assert_array_equal(l1_subgradient(p3, [5, -3, 0]), [0.01, -0.01, 0])
    x = np.array([1.5, -0.2, 0.0])
    np.testing.assert_array_equal(l1_subgradient(p3, -x), -l1_subgradient(p3, x))


def test_dimension_errors():
    p = LassoProblem(I2, [0, 0], 0.1)
    with pytest.raises(DimensionError):
        smooth_value(p, [1, 2, 3])
    with pytest.raises(DimensionError):
        LassoProblem(I2, [0, 0, 0], 0.1)


def test_gradient_matches_finite_differences(rng, make_problem):
    for _ in range(30):
        p = make_problem(rng)
        x = rng.standard_normal(p.d)
        g = smooth_gradient(p, x)
        fd = central_difference(lambda z: smooth_value(p, z), x)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


def analytic_L(p):
    return np.linalg.eigvalsh(p.A.T @ p.A / p.m)[-1]


def test_smoothness_descent_and_convexity(rng, make_problem):
    for _ in range(30):
        p = make_problem(rng)
        L = analytic_L(p)
        x, y = rng.standard_normal(p.d), rng.standard_normal(p.d)
        gx, gy = smooth_gradient(p, x), smooth_gradient(p, y)
        fx, fy = smooth_value(p, x), smooth_value(p, y)
        assert np.linalg.norm(gx - gy) <= L * np.linalg.norm(x - y) * (1 + 1e-10) + 1e-12
        assert fy <= fx + gx @ (y - x) + L / 2 * (y - x) @ (y - x) + 1e-10
        assert fy >= fx + gx @ (y - x) - 1e-10


def test_subgradient_inequality(rng, make_problem):
    for _ in range(50):
        p = make_problem(rng)
        x = np.where(rng.random(p.d) < 0.3, 0.0, rng.standard_normal(p.d))
        z = rng.standard_normal(p.d)
        assert reg_value(p, z) >= reg_value(p, x) + l1_subgradient(p, x) @ (z - x) - 1e-12


def test_lipschitz_examples():
    assert lipschitz_constant(LassoProblem(I2, [0, 0], 0.1)) == pytest.approx(0.25, rel=1e-10)
    assert lipschitz_constant(LassoProblem(np.diag([2.0, 1.0]), [0, 0], 0.1)) == pytest.approx(1.0, rel=1e-10)
    p = LassoProblem(np.diag([2.0, 1.0]), [0, 0], 0.1)
    assert lipschitz_constant(p, mode="analytic") == pytest.approx(2 * lipschitz_constant(p), rel=1e-12)


def test_lipschitz_matches_jacobi_oracle(rng):
    for _ in range(40):
        d = int(rng.integers(1, 6))
        m = int(rng.integers(d, 12))
        p = LassoProblem(rng.standard_normal((m, d)), rng.standard_normal(m), 0.1)
        expected = jacobi_eigenvalues(p.A.T @ p.A / (2 * p.m))[-1]
        assert lipschitz_constant(p, tol=1e-10) == pytest.approx(expected, rel=1e-8)


def test_lipschitz_start_vector_in_null_space():
    A = np.array([[1.0, -1.0], [1.0, -1.0]])
    assert lipschitz_constant(LassoProblem(A, [0, 0], 0.1)) == pytest.approx(1.0, rel=1e-9)


def test_lipschitz_failure_carries_estimate(rng):
    # nearly tied top eigenvalues and a tiny iteration budget
    A = np.diag([1.0, 1.0 - 1e-6, 0.5])
    with pytest.raises(PowerIterationError) as info:
        lipschitz_constant(LassoProblem(A, np.zeros(3), 0.1), tol=1e-16, max_power_iters=3)
    assert 0 < info.value.estimate <= 0.5


def test_lipschitz_rejects_zero_matrix():
    with pytest.raises(ValueError):
        lipschitz_constant(LassoProblem(np.zeros((2, 2)), [0, 0], 0.1))
