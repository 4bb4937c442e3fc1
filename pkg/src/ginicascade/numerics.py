"""Shared differentiable primitives: activations, losses, impurity, grad checking.

All functions are pure and operate on numpy arrays; class distributions are
plain float vectors of length ``N_CLASSES`` that are non-negative and sum
to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import NonFiniteGradient

N_CLASSES = 5

# Floor applied to probabilities before taking logs; keeps losses finite
# without visibly biasing them.
PROB_FLOOR = 1e-12


def sigmoid(z):
    """Numerically stable logistic function, elementwise.

    Safe for |z| up to at least 1e4 (saturates instead of overflowing).
    """
    z = np.asarray(z, dtype=float)
    pos = 1.0 / (1.0 + np.exp(-np.clip(z, 0.0, None)))
    ez = np.exp(np.clip(z, None, 0.0))
    neg = ez / (1.0 + ez)
    out = np.where(z >= 0, pos, neg)
    return float(out) if out.ndim == 0 else out


def softmax(logits, negate: bool = False):
    """Softmax over the last axis, stabilized by max subtraction.

    With ``negate=True`` the exponent is -z_c instead of z_c, i.e. the
    smallest logit gets the largest probability.
    """
    z = np.asarray(logits, dtype=float)
    if negate:
        z = -z
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(predicted, target_class: int) -> float:
    """-log p[target], with p floored at PROB_FLOOR so the result is finite."""
    p = float(np.asarray(predicted, dtype=float)[target_class])
    return -np.log(max(p, PROB_FLOOR))


def gini_impurity(dist):
    """1 - sum(p^2) over the last axis. Zero for one-hot, 1 - 1/C for uniform."""
    p = np.asarray(dist, dtype=float)
    g = 1.0 - np.sum(p * p, axis=-1)
    return float(g) if np.ndim(g) == 0 else g


def is_distribution(p, atol: float = 1e-6) -> bool:
    """True if p is a valid length-N_CLASSES probability vector."""
    p = np.asarray(p, dtype=float)
    return (
        p.shape == (N_CLASSES,)
        and bool(np.all(p >= -atol))
        and abs(float(p.sum()) - 1.0) <= atol
    )


class DifferentiableClassifier(Protocol):
    """What grad_check needs from a model: a flat parameter vector, a scalar
    loss and its analytic gradient on a batch."""

    def params_vector(self) -> np.ndarray: ...

    def set_params_vector(self, v: np.ndarray) -> None: ...

    def loss(self, X: np.ndarray, y: np.ndarray) -> float: ...

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]: ...


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_parameter_index: int
    passed: bool


def grad_check(
    model: DifferentiableClassifier,
    X: np.ndarray,
    y: np.ndarray,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Relative error per parameter is |g_a - g_fd| / max(1, |g_a|, |g_fd|),
    which stays bounded when gradients are near zero.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    theta = model.params_vector().copy()
    _, analytic = model.loss_and_grads(X, y)
    if not np.all(np.isfinite(analytic)):
        raise NonFiniteGradient("analytic gradient contains NaN/Inf")

    numeric = np.empty_like(analytic)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = epsilon
        model.set_params_vector(theta + step)
        lo_plus = model.loss(X, y)
        model.set_params_vector(theta - step)
        lo_minus = model.loss(X, y)
        numeric[i] = (lo_plus - lo_minus) / (2.0 * epsilon)
    model.set_params_vector(theta)
    if not np.all(np.isfinite(numeric)):
        raise NonFiniteGradient("finite-difference gradient contains NaN/Inf")

    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel)) if rel.size else 0
    max_rel = float(rel[worst]) if rel.size else 0.0
    return GradCheckReport(
        max_relative_error=max_rel,
        worst_parameter_index=worst,
        passed=max_rel <= tolerance,
    )
