"""Gradient-based minimizers for the variational loops."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class NonFiniteCostError(RuntimeError):
    """The objective returned NaN or infinity."""


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    trace: np.ndarray = field(repr=False)
    n_iters: int = 0
    converged: bool = False
    grad_norm: float = np.inf


ValueAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _check_finite(f: float, g: np.ndarray) -> None:
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteCostError(f"objective returned a non-finite value ({f})")


def _check_params_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteCostError("optimizer produced non-finite parameters")


def minimize_adam(
    value_and_grad: ValueAndGrad,
    x0: np.ndarray,
    learning_rate: float = 0.01,
    max_iters: int = 2000,
    grad_tol: float = 1e-7,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    fun_tol: float | None = None,
    plateau_patience: int = 200,
    plateau_factor: float = 0.5,
    min_learning_rate: float = 1e-5,
) -> OptimizeResult:
    """Adam with plateau-triggered learning-rate halving.

    Returns the lowest-cost iterate seen, not the last one; the landscape is
    rugged enough that the final step can be uphill.
    """
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    lr = learning_rate
    best_x = x.copy()
    best_f = np.inf
    since_best = 0
    trace = []
    converged = False
    grad_norm = np.inf
    for it in range(1, max_iters + 1):
        _check_params_finite(x)
        f, g = value_and_grad(x)
        _check_finite(f, g)
        trace.append(f)
        if f < best_f:
            best_f, best_x = f, x.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= plateau_patience and lr > min_learning_rate:
                lr = max(lr * plateau_factor, min_learning_rate)
                since_best = 0
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < grad_tol:
            converged = True
            break
        if fun_tol is not None and f <= fun_tol:
            converged = True
            break
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**it)
        v_hat = v / (1.0 - beta2**it)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return OptimizeResult(best_x, float(best_f), np.asarray(trace), len(trace), converged, grad_norm)


def minimize_sgd(
    value_and_grad: ValueAndGrad,
    x0: np.ndarray,
    learning_rate: float = 0.01,
    max_iters: int = 2000,
    grad_tol: float = 1e-7,
    fun_tol: float | None = None,
) -> OptimizeResult:
    """Plain gradient descent with a fixed step size."""
    x = np.array(x0, dtype=float)
    best_x = x.copy()
    best_f = np.inf
    trace = []
    converged = False
    grad_norm = np.inf
    for _ in range(max_iters):
        _check_params_finite(x)
        f, g = value_and_grad(x)
        _check_finite(f, g)
        trace.append(f)
        if f < best_f:
            best_f, best_x = f, x.copy()
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < grad_tol:
            converged = True
            break
        if fun_tol is not None and f <= fun_tol:
            converged = True
            break
        x = x - learning_rate * g
    return OptimizeResult(best_x, float(best_f), np.asarray(trace), len(trace), converged, grad_norm)


MINIMIZERS = {"adam": minimize_adam, "sgd": minimize_sgd}
