"""Per-class gradient accumulation: positive received, negative produced/received, and the
class-pair negative-gradient matrix behind the loss margins and the diagnostics.

For a sample of class k with predicted probabilities p (taken from the logits
actually used in the loss), the softmax-CE gradient magnitudes are 1 - p_k at
the true logit and p_j at every other logit. Those are the quantities
accumulated here, cumulatively over all epochs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError

PROB_SUM_TOL = 1e-6


@dataclass
class GradAccumulators:
    """theta: positive gradient received per class weight; phi: negative gradient
    produced by each class's samples; nu: negative gradient received per class
    weight; cross[k][j]: negative gradient from class-k samples onto class j."""

    theta: np.ndarray
    phi: np.ndarray
    nu: np.ndarray
    cross: np.ndarray

    @classmethod
    def zeros(cls, num_classes: int) -> "GradAccumulators":
        return cls(
            theta=np.zeros(num_classes),
            phi=np.zeros(num_classes),
            nu=np.zeros(num_classes),
            cross=np.zeros((num_classes, num_classes)),
        )

    @property
    def num_classes(self) -> int:
        return len(self.theta)

    def copy(self) -> "GradAccumulators":
        return GradAccumulators(
            theta=self.theta.copy(),
            phi=self.phi.copy(),
            nu=self.nu.copy(),
            cross=self.cross.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "phi": self.phi.tolist(),
            "nu": self.nu.tolist(),
            "cross": self.cross.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GradAccumulators":
        return cls(
            theta=np.asarray(payload["theta"], dtype=np.float64),
            phi=np.asarray(payload["phi"], dtype=np.float64),
            nu=np.asarray(payload["nu"], dtype=np.float64),
            cross=np.asarray(payload["cross"], dtype=np.float64),
        )


def _check_prob_sums(sums: np.ndarray) -> None:
    if np.any(np.abs(sums - 1.0) > PROB_SUM_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise DomainError(f"probabilities must sum to 1 (off by {worst:.3g})")


def accumulate(acc: GradAccumulators, probs, true_class: int) -> GradAccumulators:
    """Add one sample's gradient magnitudes: 1 - p_k to theta_k, p_j (j != k) to
    cross[k][j], nu_j, and phi_k."""
    p = np.asarray(probs, dtype=np.float64)
    _check_prob_sums(p.sum(keepdims=True))
    k = int(true_class)
    negative = p.copy()
    negative[k] = 0.0
    acc.theta[k] += 1.0 - p[k]
    acc.phi[k] += negative.sum()
    acc.nu += negative
    acc.cross[k] += negative
    return acc


def accumulate_batch(acc: GradAccumulators, probs_rows: np.ndarray, labels: np.ndarray) -> GradAccumulators:
    """Vectorized accumulate over a batch of probability rows."""
    p = np.asarray(probs_rows, dtype=np.float64)
    _check_prob_sums(p.sum(axis=1))
    rows = np.arange(len(labels))
    negative = p.copy()
    negative[rows, labels] = 0.0
    np.add.at(acc.theta, labels, 1.0 - p[rows, labels])
    np.add.at(acc.phi, labels, negative.sum(axis=1))
    acc.nu += negative.sum(axis=0)
    np.add.at(acc.cross, labels, negative)
    return acc


def floor_epsilon(acc: GradAccumulators, eps: float) -> GradAccumulators:
    """Raise theta and phi entries to at least eps so their logs stay defined."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    np.maximum(acc.theta, eps, out=acc.theta)
    np.maximum(acc.phi, eps, out=acc.phi)
    return acc


def gradient_ratio(acc: GradAccumulators) -> np.ndarray:
    """Per-class ratio of accumulated positive to received negative gradient."""
    if np.any(acc.nu <= 0):
        j = int(np.argmin(acc.nu))
        raise DegenerateInputError(f"class {j} has received no negative gradient")
    return acc.theta / acc.nu


def produced_negative_distribution(acc: GradAccumulators, normalized: bool = False) -> np.ndarray:
    """Per-class negative gradient produced; optionally normalized to sum 1."""
    phi = acc.phi.copy()
    if normalized:
        total = phi.sum()
        if total <= 0:
            raise DegenerateInputError("no negative gradient accumulated yet")
        phi /= total
    return phi
