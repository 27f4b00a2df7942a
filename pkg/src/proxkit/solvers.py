"""Iterative solvers: plain GD, proximal GD with constant and variable step, Adam with an l1 subgradient.

All solvers share the same loop shape. At iteration ``k`` the solver records
the current iterate ``x_k``, takes one step to ``x_{k+1}`` and then asks
:func:`check_stop` whether to finish. The returned iterate is ``x_{k+1}``
except on a non-monotone stop, where the better point ``x_k`` is kept.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from proxkit.core import DimensionError, IterationTrace, NonFiniteError, SolveResult, StopReason, as_vec
from proxkit.objective import (
    LIPSCHITZ_MODES,
    LassoProblem,
    l1_subgradient,
    lipschitz_constant,
    smooth_value_and_gradient,
)
from proxkit.prox import soft_threshold


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-3
    lambda0: float = 0.1
    mu0: float = 0.99
    mu1: float = 0.95
    eta_rho: float = 0.99
    x0: Union[str, np.ndarray, None] = "zeros"
    monotone_stop: bool = True
    lipschitz_mode: str = "paper"
    record_iterates: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if not 0 < self.mu1 < self.mu0 < 1:
            raise ValueError(f"need 0 < mu1 < mu0 < 1, got mu1={self.mu1}, mu0={self.mu0}")
        if not 0 < self.eta_rho < 1:
            raise ValueError("eta_rho must lie in (0, 1)")
        if self.lipschitz_mode not in LIPSCHITZ_MODES:
            raise ValueError(f"lipschitz_mode must be one of {LIPSCHITZ_MODES}")

    def initial_point(self, d: int) -> np.ndarray:
        if self.x0 is None or (isinstance(self.x0, str) and self.x0 == "zeros"):
            return np.zeros(d)
        x0 = as_vec(self.x0, "x0").copy()
        if x0.shape[0] != d:
            raise DimensionError(f"x0 has length {x0.shape[0]}, problem has d = {d}")
        return x0


@dataclass(frozen=True)
class AdamConfig:
    step: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.step > 0 or not self.epsilon > 0:
            raise ValueError("step and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")


def check_stop(
    k: int,
    objective_prev: float,
    objective_next: float,
    grad_norm_next: float,
    cfg: SolverConfig,
    monotone: Optional[bool] = None,
) -> Optional[StopReason]:
    """Decide whether iteration ``k`` (which produced x_{k+1}) ends the run.

    Precedence is GradTol, then NonMonotone, then MaxIters. The non-monotone
    test is strict, so a flat objective does not stop the run.
    """
    if monotone is None:
        monotone = cfg.monotone_stop
    if grad_norm_next < cfg.grad_tol:
        return StopReason.GRAD_TOL
    if monotone and objective_next > objective_prev:
        return StopReason.NON_MONOTONE
    if k + 1 >= cfg.max_iters:
        return StopReason.MAX_ITERS
    return None


class StepController:
    """Variable step-size rule.

    The step shrinks to ``mu1 * |dx| / |dg|`` when the current step exceeds
    ``mu0`` times that local ratio, and otherwise grows by
    ``min(lam, 1) * eta_rho**k``. The test is evaluated cross-multiplied,
    ``lam * |dg| > mu0 * |dx|``, so it never divides by a vanishing ``|dg|``.
    """

    def __init__(self, lambda0: float, mu0: float = 0.99, mu1: float = 0.95, eta_rho: float = 0.99):
        if not lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if not 0 < mu1 < mu0 < 1:
            raise ValueError("need 0 < mu1 < mu0 < 1")
        self.current_lambda = float(lambda0)
        self.mu0 = mu0
        self.mu1 = mu1
        self.eta_rho = eta_rho
        self.k = 0
        self.last_shrunk = False

    @classmethod
    def from_config(cls, cfg: SolverConfig) -> "StepController":
        return cls(cfg.lambda0, cfg.mu0, cfg.mu1, cfg.eta_rho)

    def eta(self, k: int) -> float:
        return self.eta_rho**k

    def update_norms(self, dx_norm: float, dg_norm: float) -> float:
        lam = self.current_lambda
        if lam * dg_norm > self.mu0 * dx_norm:
            new = self.mu1 * dx_norm / dg_norm
            self.last_shrunk = True
        else:
            new = lam + min(lam, 1.0) * self.eta(self.k)
            self.last_shrunk = False
        if not new > 0:
            # only reachable when dx underflows to zero while dg does not
            raise NonFiniteError(f"step size collapsed to {new}", self.k)
        self.current_lambda = new
        self.k += 1
        return new

    def update(self, x_prev, x_next, g_prev, g_next) -> float:
        return self.update_norms(
            float(np.linalg.norm(np.subtract(x_next, x_prev))),
            float(np.linalg.norm(np.subtract(g_next, g_prev))),
        )


def step_controller_update(s: StepController, x_prev, x_next, g_prev, g_next) -> float:
    return s.update(x_prev, x_next, g_prev, g_next)


class _Loop:
    """Bookkeeping shared by every solver: trace, timing, reference distance, finiteness."""

    def __init__(self, p: LassoProblem, cfg: SolverConfig, x_ref, started: float, on_record=None):
        self.trace = IterationTrace(iterates=[] if cfg.record_iterates else None)
        self.started = started
        self.on_record = on_record
        self.x_ref = None if x_ref is None else as_vec(x_ref, "x_ref")
        if self.x_ref is not None and self.x_ref.shape[0] != p.d:
            raise DimensionError("reference solution has the wrong dimension")

    def record(self, k, x, objective, grad_norm, step):
        dist = None if self.x_ref is None else float(np.linalg.norm(x - self.x_ref))
        self.trace.append(k, objective, grad_norm, step, dist, time.perf_counter() - self.started, x)
        if self.on_record is not None:
            self.on_record(self.trace.row(-1))

    @staticmethod
    def ensure_finite(k, *values):
        for v in values:
            if not np.all(np.isfinite(v)):
                raise NonFiniteError("non-finite value encountered", k)


def _composite(p: LassoProblem, x):
    f, g = smooth_value_and_gradient(p, x)
    return f + p.alpha * float(np.sum(np.abs(x))), g


def _prox_loop(
    p: LassoProblem,
    cfg: SolverConfig,
    started: float,
    lipschitz: float,
    step_for: Callable[[int], float],
    after_step: Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None],
    x_ref,
    on_record,
) -> SolveResult:
    loop = _Loop(p, cfg, x_ref, started, on_record)
    x = cfg.initial_point(p.d)
    F, g = _composite(p, x)
    loop.ensure_finite(0, F, g)
    k = 0
    while True:
        lam = step_for(k)
        loop.record(k, x, F, np.linalg.norm(g), lam)
        x_next = soft_threshold(x - lam * g, p.alpha * lam)
        F_next, g_next = _composite(p, x_next)
        loop.ensure_finite(k, F_next, g_next)
        gn_next = float(np.linalg.norm(g_next))
        reason = check_stop(k, F, F_next, gn_next, cfg)
        if reason is StopReason.NON_MONOTONE:
            return SolveResult(x, k + 1, reason, loop.trace, F, float(np.linalg.norm(g)), lam, lipschitz)
        if reason is not None:
            return SolveResult(x_next, k + 1, reason, loop.trace, F_next, gn_next, lam, lipschitz)
        after_step(k, x, x_next, g, g_next)
        x, F, g = x_next, F_next, g_next
        k += 1


def prox_gd_constant_solve(
    p: LassoProblem, cfg: SolverConfig = SolverConfig(), x_ref=None, on_record=None
) -> SolveResult:
    """Proximal gradient descent with the constant step 1/L."""
    started = time.perf_counter()
    L = lipschitz_constant(p, mode=cfg.lipschitz_mode)
    lam = 1.0 / L
    return _prox_loop(p, cfg, started, L, lambda k: lam, lambda *a: None, x_ref, on_record)


def prox_gd_variable_solve(
    p: LassoProblem, cfg: SolverConfig = SolverConfig(), x_ref=None, on_record=None
) -> SolveResult:
    """Proximal gradient descent with the locally adapted step of :class:`StepController`.

    The global constant L is still computed, and reported, so wall-clock
    timings stay comparable with the constant-step solver; it is not used.
    """
    started = time.perf_counter()
    L = lipschitz_constant(p, mode=cfg.lipschitz_mode)
    ctl = StepController.from_config(cfg)

    def after_step(k, x, x_next, g, g_next):
        ctl.update(x, x_next, g, g_next)

    return _prox_loop(p, cfg, started, L, lambda k: ctl.current_lambda, after_step, x_ref, on_record)


def gd_solve(p: LassoProblem, cfg: SolverConfig = SolverConfig(), x_ref=None, on_record=None) -> SolveResult:
    """Gradient descent on the smooth least-squares term with step 1/L."""
    if p.alpha != 0:
        raise ValueError("gd_solve handles the smooth problem only; use alpha = 0")
    started = time.perf_counter()
    L = lipschitz_constant(p, mode=cfg.lipschitz_mode)
    lam = 1.0 / L
    loop = _Loop(p, cfg, x_ref, started, on_record)
    x = cfg.initial_point(p.d)
    f, g = smooth_value_and_gradient(p, x)
    loop.ensure_finite(0, f, g)
    k = 0
    while True:
        loop.record(k, x, f, np.linalg.norm(g), lam)
        x = x - lam * g
        f, g = smooth_value_and_gradient(p, x)
        loop.ensure_finite(k, f, g)
        gn = float(np.linalg.norm(g))
        reason = check_stop(k, math.inf, f, gn, cfg, monotone=False)
        if reason is not None:
            return SolveResult(x, k + 1, reason, loop.trace, f, gn, lam, L)
        k += 1


class AdamL1:
    """Bias-corrected Adam driven by grad f(x) + alpha*sgn(x)."""

    def __init__(self, d: int, cfg: AdamConfig = AdamConfig()):
        self.cfg = cfg
        self.m = np.zeros(d)
        self.v = np.zeros(d)
        self.t = 0

    def step(self, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * direction
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * direction * direction
        m_hat = self.m / (1.0 - c.beta1**self.t)
        v_hat = self.v / (1.0 - c.beta2**self.t)
        return x - c.step * m_hat / (np.sqrt(v_hat) + c.epsilon)


def adam_l1_solve(
    p: LassoProblem,
    cfg: SolverConfig = SolverConfig(),
    acfg: AdamConfig = AdamConfig(),
    x_ref=None,
    on_record=None,
) -> SolveResult:
    """Adam on the composite objective using the l1 subgradient.

    Adam is non-monotone by design, so only the gradient tolerance and the
    iteration budget stop it. The trace's step column holds ``acfg.step``.
    """
    started = time.perf_counter()
    cfg = replace(cfg, monotone_stop=False)
    loop = _Loop(p, cfg, x_ref, started, on_record)
    opt = AdamL1(p.d, acfg)
    x = cfg.initial_point(p.d)
    F, g = _composite(p, x)
    loop.ensure_finite(0, F, g)
    k = 0
    while True:
        loop.record(k, x, F, np.linalg.norm(g), acfg.step)
        x = opt.step(x, g + l1_subgradient(p, x))
        F, g = _composite(p, x)
        loop.ensure_finite(k, F, g)
        gn = float(np.linalg.norm(g))
        reason = check_stop(k, math.inf, F, gn, cfg)
        if reason is not None:
            return SolveResult(x, k + 1, reason, loop.trace, F, gn, acfg.step, None)
        k += 1


SOLVERS = {
    "gd": gd_solve,
    "prox-const": prox_gd_constant_solve,
    "prox-var": prox_gd_variable_solve,
    "adam": adam_l1_solve,
}
