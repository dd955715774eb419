"""Cross-entropy and its gradient-aware margin-adjusted variant, with analytic gradients.

The adjusted loss shifts every negative-class logit by log(theta_j) - log(phi_k),
where theta_j is the positive gradient accumulated by class j's weight and
phi_k the negative gradient produced so far by samples of the true class k.
The true-class logit is never shifted. Both accumulators are treated as
constants inside a step: no gradient flows into them.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DimensionError, DomainError
from .model import ClassifierParams, logits as model_logits
from .numerics import Matrix, Vector, as_vector, softmax


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross_entropy"
    GALA = "gala"


def _check_class(num_classes: int, true_class: int) -> int:
    k = int(true_class)
    if not 0 <= k < num_classes:
        raise DimensionError(f"true class {k} out of range for {num_classes} classes")
    return k


def gala_adjust(logits, true_class: int, theta, phi) -> Vector:
    """Shift negative-class logits by log(theta_j) - log(phi_k); leave the true logit alone.

    The margin vector is formed first and then added, so equal theta and phi
    cancel exactly rather than to within rounding.
    """
    z = as_vector(logits)
    th = as_vector(theta)
    ph = as_vector(phi)
    if th.shape != z.shape or ph.shape != z.shape:
        raise DimensionError("theta and phi must match the logit length")
    k = _check_class(z.shape[0], true_class)
    if np.any(th <= 0):
        raise DomainError("theta must be strictly positive (log is taken)")
    if ph[k] <= 0:
        raise DomainError("phi at the true class must be strictly positive (log is taken)")
    margins = np.log(th) - np.log(ph[k])
    adjusted = z + margins
    adjusted[k] = z[k]
    return adjusted


def _resolved_logits(kind, logits_vec: Vector, true_class: int, theta, phi) -> Vector:
    kind = LossKind(kind)
    if kind is LossKind.GALA:
        return gala_adjust(logits_vec, true_class, theta, phi)
    return as_vector(logits_vec)


def loss(kind, logits, true_class: int, theta=None, phi=None) -> float:
    """-log softmax(z)_k over raw (cross_entropy) or margin-adjusted (gala) logits.

    Evaluated via log-sum-exp of the logits, never softmax-then-log, so large
    margins cannot underflow the true-class probability.
    """
    z = _resolved_logits(kind, as_vector(logits), true_class, theta, phi)
    k = _check_class(z.shape[0], true_class)
    m = z.max()
    return float((m - z[k]) + np.log(np.exp(z - m).sum()))


def grad_logits(kind, logits, true_class: int, theta=None, phi=None) -> Vector:
    """Gradient of the loss w.r.t. the logits: softmax(adjusted) minus the true one-hot."""
    z = _resolved_logits(kind, as_vector(logits), true_class, theta, phi)
    k = _check_class(z.shape[0], true_class)
    g = softmax(z)
    g[k] -= 1.0
    return g


def grad_params(
    kind,
    params: ClassifierParams,
    x,
    true_class: int,
    theta=None,
    phi=None,
) -> tuple[Matrix, Vector]:
    """Per-sample gradient w.r.t. the classifier: row j of the weight gradient is g_j * x.

    The bias gradient is g when the bias is part of the model and zero
    otherwise (the loss then does not depend on it).
    """
    v = as_vector(x)
    z = model_logits(params, v)
    g = grad_logits(kind, z, true_class, theta, phi)
    weight_grad = np.outer(g, v)
    bias_grad = g.copy() if params.use_bias else np.zeros_like(g)
    return weight_grad, bias_grad


# Batch counterparts used by the training loop. They follow the same
# operation order as the per-sample functions (margin matrix first, then
# added), so the two paths agree bit for bit.

def adjusted_logits_batch(logit_rows: Matrix, labels: np.ndarray, theta, phi) -> Matrix:
    """Row-wise margin adjustment for a batch of logits with per-row true classes."""
    th = as_vector(theta)
    ph = as_vector(phi)
    if np.any(th <= 0) or np.any(ph[labels] <= 0):
        raise DomainError("theta and phi entries in use must be strictly positive")
    rows = np.arange(len(labels))
    margins = np.log(th)[None, :] - np.log(ph)[labels][:, None]
    adjusted = logit_rows + margins
    adjusted[rows, labels] = logit_rows[rows, labels]
    return adjusted


def softmax_rows(logit_rows: Matrix) -> Matrix:
    """Max-shifted softmax applied to each row."""
    e = np.exp(logit_rows - logit_rows.max(axis=1)[:, None])
    return e / e.sum(axis=1)[:, None]


def per_sample_losses(logit_rows: Matrix, labels: np.ndarray) -> Vector:
    """Row-wise -log softmax(z)_label via log-sum-exp."""
    rows = np.arange(len(labels))
    m = logit_rows.max(axis=1)
    lse = np.log(np.exp(logit_rows - m[:, None]).sum(axis=1))
    return (m - logit_rows[rows, labels]) + lse


def grad_logits_batch(probs_rows: Matrix, labels: np.ndarray) -> Matrix:
    """Row-wise softmax-CE gradient given the already-computed probabilities."""
    g = probs_rows.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g
