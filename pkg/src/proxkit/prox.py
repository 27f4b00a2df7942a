"""Soft-thresholding and the proximal gradient step for the l1 penalty."""

from __future__ import annotations

import numpy as np

from proxkit.core import as_vec
from proxkit.objective import LassoProblem, smooth_gradient


def soft_threshold(z, theta: float) -> np.ndarray:
    """Componentwise sgn(z) * max(|z| - theta, 0).

    Coordinates with ``|z_i| <= theta`` come back as literal 0.0 so that the
    recovered support is exact.
    """
    if theta < 0:
        raise ValueError(f"threshold must be non-negative, got {theta}")
    z = as_vec(z, "z")
    out = z - np.sign(z) * theta
    out[np.abs(z) <= theta] = 0.0
    return out


def prox_step(p: LassoProblem, x, lam: float, grad=None) -> np.ndarray:
    """prox_{lam}(x - lam * grad f(x)) for g = alpha * ||.||_1.

    ``grad`` may be passed when the caller already holds grad f(x).
    """
    if not lam > 0:
        raise ValueError(f"step size must be positive, got {lam}")
    x = as_vec(x, "x")
    if grad is None:
        grad = smooth_gradient(p, x)
    return soft_threshold(x - lam * grad, p.alpha * lam)


def generalized_gradient(p: LassoProblem, x, lam: float) -> np.ndarray:
    x = as_vec(x, "x")
    return (x - prox_step(p, x, lam)) / lam
