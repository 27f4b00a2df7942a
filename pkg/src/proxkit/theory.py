"""Convergence guarantees as numerical checks over solver traces.

Each ``check_*`` function evaluates one inequality at every index a trace
allows and reports the violations. The inequalities assume the step is
1/L with L the *true* Lipschitz constant of grad f, i.e. traces produced with
``lipschitz_mode="analytic"``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from proxkit.core import IterationTrace, ProxkitError, as_vec
from proxkit.objective import (
    LassoProblem,
    PowerIterationError,
    composite_value,
    gram,
    lipschitz_constant,
    smooth_value,
)
from proxkit.prox import soft_threshold

SLACK = 1e-9
MU_VALID_TOL = 1e-10


class CheckError(ProxkitError, ValueError):
    """A check was called on a trace or instance it cannot evaluate."""


class NotStronglyConvexError(CheckError):
    pass


@dataclass
class Violation:
    index: int
    lhs: float
    rhs: float
    slack: float
    part: str = ""


@dataclass
class BoundReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    worst_slack: float = -np.inf
    tightest_index: Optional[int] = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def observe(self, index: int, lhs: float, rhs: float, tol: float = SLACK, part: str = ""):
        slack = lhs - rhs
        self.checked += 1
        if slack > self.worst_slack:
            self.worst_slack = slack
            self.tightest_index = index
        if slack > tol:
            self.violations.append(Violation(index, lhs, rhs, slack, part))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        out["worst_slack"] = None if self.checked == 0 else float(self.worst_slack)
        return out


@dataclass(frozen=True)
class StrongConvexityEstimate:
    mu: float
    valid: bool


def estimate_strong_convexity(p: LassoProblem, tol: float = 1e-12, max_iters: int = 20000) -> StrongConvexityEstimate:
    """Smallest eigenvalue of (1/m) A^T A by inverse iteration on its Cholesky factor."""
    M = gram(p)
    try:
        C = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return StrongConvexityEstimate(0.0, False)
    v = np.full(p.d, 1.0 / np.sqrt(p.d))
    mu = float(v @ M @ v)
    for _ in range(max_iters):
        w = np.linalg.solve(C.T, np.linalg.solve(C, v))
        v = w / np.linalg.norm(w)
        new = float(v @ M @ v)
        if abs(new - mu) <= tol * abs(new):
            mu = new
            break
        mu = new
    else:
        raise PowerIterationError("inverse iteration did not converge", mu)
    mu = max(mu, 0.0)
    return StrongConvexityEstimate(mu, mu > MU_VALID_TOL)


def reference_solution(p: LassoProblem, max_iters: int, tol: float = 1e-10, x0=None):
    """High-accuracy minimiser of F by long-run proximal gradient descent.

    Runs with step 1/L (true Lipschitz constant) until the generalised
    gradient falls below ``tol`` or ``max_iters`` is spent. Returns ``(x*, F*)``.
    """
    L = lipschitz_constant(p, mode="analytic")
    lam = 1.0 / L
    G = gram(p)
    c = (p.b @ p.A) / p.m
    x = np.zeros(p.d) if x0 is None else as_vec(x0).copy()
    for _ in range(max_iters):
        x_next = soft_threshold(x - lam * (G @ x - c), p.alpha * lam)
        step = np.linalg.norm(x_next - x) / lam
        x = x_next
        if step < tol:
            break
    return x, composite_value(p, x)


def _need(trace: IterationTrace, n: int):
    if len(trace) < n:
        raise CheckError(f"trace has {len(trace)} records; this check needs at least {n}")


def _iterates(trace: IterationTrace):
    if trace.iterates is None:
        raise CheckError("this check needs a trace recorded with record_iterates=True")
    return trace.iterates


def _analytic_L(p, lipschitz):
    return lipschitz if lipschitz is not None else lipschitz_constant(p, mode="analytic")


def _start(trace, x0, d):
    if trace.iterates:
        return trace.iterates[0]
    return np.zeros(d) if x0 is None else as_vec(x0)


def check_max_decrease(p: LassoProblem, trace: IterationTrace, lipschitz: Optional[float] = None) -> BoundReport:
    """f(x_{k+1}) <= f(x_k) - |grad f(x_k)|^2 / (2L) at every consecutive pair."""
    _need(trace, 2)
    L = _analytic_L(p, lipschitz)
    rep = BoundReport("max-decrease")
    f, gn = trace.objective, trace.grad_norm
    for k in range(len(trace) - 1):
        rep.observe(k, f[k + 1], f[k] - gn[k] ** 2 / (2 * L))
    return rep


def check_sublinear_gd(
    p: LassoProblem, trace: IterationTrace, x_star, x0=None, lipschitz: Optional[float] = None
) -> BoundReport:
    """f(x_n) - f(x*) <= L/(2n) |x_0 - x*|^2 for every recorded n >= 1."""
    if x_star is None:
        raise CheckError("a reference minimiser x* is required")
    _need(trace, 2)
    x_star = as_vec(x_star)
    L = _analytic_L(p, lipschitz)
    f_star = smooth_value(p, x_star)
    r0 = float(np.sum((_start(trace, x0, p.d) - x_star) ** 2))
    rep = BoundReport("gd-sublinear")
    for n in range(1, len(trace)):
        rep.observe(n, trace.objective[n] - f_star, L / (2 * n) * r0)
    return rep


def _distances(trace, x_star):
    if trace.iterates is not None:
        return [float(np.linalg.norm(x - x_star)) for x in trace.iterates]
    if any(d is None for d in trace.dist_to_opt):
        raise CheckError("trace carries neither iterates nor distances to x*")
    return list(trace.dist_to_opt)


def check_geometric_gd(
    p: LassoProblem,
    trace: IterationTrace,
    x_star,
    mu_est: StrongConvexityEstimate,
    lipschitz: Optional[float] = None,
) -> BoundReport:
    """Geometric contraction of |x_k - x*|^2 and of f(x_n) - f(x*) under strong convexity."""
    if not mu_est.valid:
        raise NotStronglyConvexError("instance is not strongly convex (mu ~ 0)")
    _need(trace, 2)
    x_star = as_vec(x_star)
    L = _analytic_L(p, lipschitz)
    q = max(0.0, 1.0 - mu_est.mu / L)
    dist = _distances(trace, x_star)
    f_star = smooth_value(p, x_star)
    rep = BoundReport("gd-geometric")
    for k in range(len(dist) - 1):
        rep.observe(k, dist[k + 1] ** 2, q * dist[k] ** 2, part="distance")
    for n in range(1, len(trace)):
        rep.observe(n, trace.objective[n] - f_star, 0.5 * L * q**n * dist[0] ** 2, part="value")
    return rep


def check_prox_descent_lemma(p: LassoProblem, trace: IterationTrace, z_samples: Sequence) -> BoundReport:
    """F(x_{k+1}) <= F(z) - G(x_k)^T (z - x_k) - |x_{k+1} - x_k|^2 / (2 lam) for all k and sampled z."""
    xs = _iterates(trace)
    _need(trace, 2)
    zs = [as_vec(z) for z in z_samples]
    if any(x.shape[0] != p.d for x in xs) or any(z.shape[0] != p.d for z in zs):
        raise CheckError("trace or z samples do not match the problem dimension")
    F_z = [composite_value(p, z) for z in zs]
    rep = BoundReport("prox-lemma")
    for k in range(len(xs) - 1):
        lam = trace.step[k]
        step = xs[k + 1] - xs[k]
        G = -step / lam
        tail = float(step @ step) / (2 * lam)
        for z, fz in zip(zs, F_z):
            rep.observe(k, trace.objective[k + 1], fz - float(G @ (z - xs[k])) - tail)
    return rep


def check_sublinear_prox(p: LassoProblem, trace: IterationTrace, x_star, x0=None) -> BoundReport:
    """F(x_n) - F(x*) <= |x_0 - x*|^2 / (2 n lam) for every recorded n >= 1."""
    if x_star is None:
        raise CheckError("a reference minimiser x* is required")
    _need(trace, 2)
    x_star = as_vec(x_star)
    F_star = composite_value(p, x_star)
    lam = trace.step[0]
    r0 = float(np.sum((_start(trace, x0, p.d) - x_star) ** 2))
    rep = BoundReport("prox-sublinear")
    for n in range(1, len(trace)):
        rep.observe(n, trace.objective[n] - F_star, r0 / (2 * n * lam))
    return rep


def check_exponential_prox(
    p: LassoProblem, trace: IterationTrace, F_star: float, mu_est: StrongConvexityEstimate
) -> BoundReport:
    """F(x_k) - F* <= (1 + lam*mu/4)^(-k) (F(x_0) - F*), plus the one-step version at every pair."""
    if not mu_est.valid:
        raise NotStronglyConvexError("instance is not strongly convex (mu ~ 0)")
    _need(trace, 1)
    lam = trace.step[0]
    q = 1.0 / (1.0 + lam * mu_est.mu / 4.0)
    tol = SLACK + 10 * abs(F_star) * 1e-12
    F = trace.objective
    gap0 = F[0] - F_star
    rep = BoundReport("prox-exponential")
    for k in range(len(F)):
        rep.observe(k, F[k] - F_star, q**k * gap0, tol, part="cumulative")
    for k in range(len(F) - 1):
        rep.observe(k, F[k + 1] - F_star, q * (F[k] - F_star), tol, part="per-step")
    return rep
