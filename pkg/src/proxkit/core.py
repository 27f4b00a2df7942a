"""Shared types and the handful of dense linear-algebra helpers everything else uses.

Vectors and matrices are plain float64 numpy arrays. The helpers here only add
shape checking on top of numpy so that dimension mistakes surface as
:class:`DimensionError` instead of broadcasting silently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ProxkitError(Exception):
    """Base class for all library errors."""


class DimensionError(ProxkitError, ValueError):
    pass


class NonFiniteError(ProxkitError, ArithmeticError):
    """A solver produced NaN/Inf. ``iteration`` is the loop index where it happened."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


def as_vec(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_mat(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def norm2(v) -> float:
    """Euclidean norm, scaled by the largest entry so tiny or huge vectors neither underflow nor overflow."""
    v = as_vec(v)
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    return scale * float(np.linalg.norm(v / scale))


def matvec(a, x) -> np.ndarray:
    a = as_mat(a)
    x = as_vec(x)
    if a.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} matrix by vector of length {x.shape[0]}")
    return a @ x


def matvec_transpose(a, y) -> np.ndarray:
    """Compute ``a.T @ y`` without materialising the transpose."""
    a = as_mat(a)
    y = as_vec(y)
    if a.shape[0] != y.shape[0]:
        raise DimensionError(f"cannot multiply transpose of {a.shape} matrix by vector of length {y.shape[0]}")
    return y @ a


class StopReason(str, enum.Enum):
    MAX_ITERS = "MaxIters"
    GRAD_TOL = "GradTol"
    NON_MONOTONE = "NonMonotone"


@dataclass
class IterationTrace:
    """Per-iteration record of a solver run.

    Record ``k`` describes the iterate ``x_k`` the solver stepped *from* at
    iteration ``k``: its objective, the norm of the smooth gradient there, the
    step size used, the distance to a reference solution (when one is known)
    and seconds elapsed since the solve started. ``iterates`` is only filled
    when the solver was asked to keep them.
    """

    k: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    dist_to_opt: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    iterates: Optional[list] = None

    def append(self, k, objective, grad_norm, step, dist_to_opt=None, elapsed=0.0, x=None):
        if self.k and k != self.k[-1] + 1:
            raise ValueError(f"trace records must be consecutive, got {k} after {self.k[-1]}")
        if not self.k and k != 0:
            raise ValueError("trace must start at k = 0")
        if not step > 0:
            raise ValueError(f"step sizes must be positive, got {step}")
        self.k.append(int(k))
        self.objective.append(float(objective))
        self.grad_norm.append(float(grad_norm))
        self.step.append(float(step))
        self.dist_to_opt.append(None if dist_to_opt is None else float(dist_to_opt))
        self.elapsed.append(float(elapsed))
        if self.iterates is not None:
            self.iterates.append(np.array(x, dtype=np.float64, copy=True))

    def __len__(self):
        return len(self.k)

    def row(self, i: int) -> tuple:
        return (self.k[i], self.objective[i], self.grad_norm[i], self.step[i], self.dist_to_opt[i], self.elapsed[i])

    def rows(self):
        return list(zip(self.k, self.objective, self.grad_norm, self.step, self.dist_to_opt, self.elapsed))


@dataclass
class SolveResult:
    final_x: np.ndarray
    iterations: int
    stop_reason: StopReason
    trace: IterationTrace
    final_objective: float
    final_grad_norm: float
    final_step: float
    lipschitz: Optional[float] = None

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason.value,
            "final_objective": self.final_objective,
            "final_grad_norm": self.final_grad_norm,
            "final_step": self.final_step,
            "lipschitz": self.lipschitz,
            "final_x": [float(v) for v in self.final_x],
        }
