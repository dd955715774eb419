"""Post-hoc prediction re-balancing: divide each class's probability column by its
L1 norm raised to a temperature, then predict by argmax.

This operates on plain probability matrices, so it works on predictions
produced by any model, not just this package's classifier.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, DomainError, ParseError
from .numerics import Matrix, as_matrix

ROW_SUM_TOL = 1e-6


def rebalance(probs, tau: float) -> Matrix:
    """Scale column k by 1 / (sum of column k)^tau. tau = 0 leaves the matrix unchanged."""
    p = as_matrix(probs)
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    norms = p.sum(axis=0)
    if np.any(norms == 0):
        j = int(np.argmin(norms))
        raise DegenerateInputError(f"class {j} has zero total probability mass")
    return p / norms**tau


def predict(matrix) -> np.ndarray:
    """Per-row argmax; ties go to the lowest class index."""
    m = as_matrix(matrix)
    if m.shape[1] < 1:
        raise DomainError("prediction needs at least one class column")
    return np.argmax(m, axis=1)


def validate_prediction_matrix(probs, tol: float = ROW_SUM_TOL) -> Matrix:
    """Check rows are probability vectors (non-negative, summing to 1 within tol)."""
    p = as_matrix(probs)
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol):
        b = int(np.argmax(np.abs(sums - 1.0)))
        raise DomainError(f"row {b} sums to {sums[b]!r}, expected 1")
    return p


def write_probability_csv(matrix, path) -> None:
    """Plain numeric CSV, one row per sample, one column per class."""
    m = as_matrix(matrix)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([repr(float(v)) for v in row])


def read_probability_csv(path) -> Matrix:
    """Parse a plain numeric CSV; raises ParseError naming the offending line."""
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    with path.open("r", newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"{path}: line {line_no}: expected {width} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"{path}: line {line_no}: non-numeric value") from None
    if not rows:
        raise ParseError(f"{path}: empty file")
    return np.asarray(rows, dtype=np.float64)
