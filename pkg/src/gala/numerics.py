"""Dense float64 vector arithmetic and the elementary statistics everything else builds on.

All operations are pure functions on immutable inputs and safe to call from
any number of threads. Everything runs in 64-bit floats: the accumulated
gradient statistics downstream span several orders of magnitude and would
drift in 32-bit.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DimensionError, DomainError

# A Vector is a finite 1-D float64 array, a Matrix a finite 2-D one.
Vector = np.ndarray
Matrix = np.ndarray


def as_vector(values) -> Vector:
    """Coerce to a finite 1-D float64 array."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector contains NaN or infinity")
    return v


def as_matrix(values) -> Matrix:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix contains NaN or infinity")
    return m


def dot(a, b) -> float:
    """Standard inner product of two equal-length vectors."""
    va = as_vector(a)
    vb = as_vector(b)
    if va.shape != vb.shape:
        raise DimensionError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.dot(va, vb))


def softmax(logits) -> Vector:
    """Max-shifted softmax: p_j = exp(z_j - max z) / sum_l exp(z_l - max z).

    The shift keeps the exponentials finite for any finite input; the output
    sums to 1 and every entry lies in (0, 1].
    """
    z = as_vector(logits)
    if z.size == 0:
        raise DimensionError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two non-zero vectors, clipped to [-1, 1]."""
    va = as_vector(a)
    vb = as_vector(b)
    if va.shape != vb.shape:
        raise DimensionError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))
