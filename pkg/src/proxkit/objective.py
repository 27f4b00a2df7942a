"""The l1-regularised least-squares objective F(x) = (1/2m)||Ax - b||^2 + alpha*||x||_1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from proxkit.core import DimensionError, ProxkitError, as_mat, as_vec

LIPSCHITZ_MODES = ("paper", "analytic")

POWER_TOL = 1e-10
POWER_MAX_ITERS = 5000


class PowerIterationError(ProxkitError, RuntimeError):
    """Power iteration did not settle; ``estimate`` is the last Rayleigh quotient."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (best estimate {estimate!r})")
        self.estimate = estimate


@dataclass(frozen=True, eq=False)
class LassoProblem:
    A: np.ndarray
    b: np.ndarray
    alpha: float

    def __post_init__(self):
        A = as_mat(self.A, "A")
        b = as_vec(self.b, "b")
        if A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        # alpha == 0 is the pure least-squares problem used by plain gradient descent
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def with_alpha(self, alpha: float) -> "LassoProblem":
        return LassoProblem(self.A, self.b, alpha)

    def _check(self, x) -> np.ndarray:
        x = as_vec(x, "x")
        if x.shape[0] != self.d:
            raise DimensionError(f"x has length {x.shape[0]}, problem has d = {self.d}")
        return x

    def residual(self, x) -> np.ndarray:
        return self.A @ self._check(x) - self.b


def smooth_value(p: LassoProblem, x) -> float:
    r = p.residual(x)
    return float(r @ r) / (2.0 * p.m)


def smooth_gradient(p: LassoProblem, x) -> np.ndarray:
    return (p.residual(x) @ p.A) / p.m


def smooth_value_and_gradient(p: LassoProblem, x):
    """Both f(x) and grad f(x) from a single residual evaluation."""
    r = p.residual(x)
    return float(r @ r) / (2.0 * p.m), (r @ p.A) / p.m


def reg_value(p: LassoProblem, x) -> float:
    return p.alpha * float(np.sum(np.abs(p._check(x))))


def composite_value(p: LassoProblem, x) -> float:
    return smooth_value(p, x) + reg_value(p, x)


def l1_subgradient(p: LassoProblem, x) -> np.ndarray:
    """The element alpha*sgn(x) of the subdifferential of alpha*||x||_1, with sgn(0) = 0."""
    return p.alpha * np.sign(p._check(x))


def gram(p: LassoProblem) -> np.ndarray:
    """(1/m) A^T A, the Hessian of the smooth term."""
    return (p.A.T @ p.A) / p.m


def power_iteration(M: np.ndarray, tol: float = POWER_TOL, max_iters: int = POWER_MAX_ITERS) -> float:
    """Largest eigenvalue of a symmetric PSD matrix.

    Starts from the normalised all-ones vector and stops once the Rayleigh
    quotient changes by at most ``tol`` relative to its value.
    """
    n = M.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    w = M @ v
    if not np.any(w):
        # all-ones lies in the null space; retry from a fixed pseudo-random start
        v = np.random.default_rng(0).standard_normal(n)
        v /= np.linalg.norm(v)
        w = M @ v
        if not np.any(w):
            return 0.0
    estimate = float(v @ w)
    for _ in range(max_iters):
        v = w / np.linalg.norm(w)
        w = M @ v
        new = float(v @ w)
        if abs(new - estimate) <= tol * abs(new):
            return new
        estimate = new
    raise PowerIterationError(f"power iteration did not converge in {max_iters} iterations", estimate)


def lipschitz_constant(
    p: LassoProblem,
    tol: float = POWER_TOL,
    max_power_iters: int = POWER_MAX_ITERS,
    mode: str = "paper",
) -> float:
    """Smoothness constant of the least-squares term.

    ``mode="paper"`` returns the largest eigenvalue of (1/2m) A^T A, the
    convention used for the published benchmark. ``mode="analytic"`` returns
    the true Lipschitz constant of the gradient, the largest eigenvalue of
    (1/m) A^T A, which is exactly twice the former.
    """
    if mode not in LIPSCHITZ_MODES:
        raise ValueError(f"unknown lipschitz mode {mode!r}; expected one of {LIPSCHITZ_MODES}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(p.A):
        raise ValueError("A must be nonzero")
    scale = 0.5 if mode == "paper" else 1.0
    return scale * power_iteration(gram(p), tol, max_power_iters)
