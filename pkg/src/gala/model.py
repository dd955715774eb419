"""Linear per-class classifier: one weight row and bias per class."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import Vector, as_vector


@dataclass
class ClassifierParams:
    """Weights (K, d) with row j the class-j weight, plus per-class biases."""

    weights: np.ndarray
    biases: np.ndarray
    use_bias: bool = True

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ConfigError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ConfigError(
                f"biases shape {self.biases.shape} does not match {self.weights.shape[0]} classes"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ConfigError("parameters contain NaN or infinity")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def init_params(
    num_classes: int,
    dim: int,
    scale: float = 0.01,
    seed=0,
    use_bias: bool = True,
) -> ClassifierParams:
    """Weights i.i.d. uniform in [-scale, scale] from the seed; biases zero."""
    if scale <= 0:
        raise ConfigError(f"init scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-scale, scale, size=(num_classes, dim))
    return ClassifierParams(
        weights=weights, biases=np.zeros(num_classes), use_bias=use_bias
    )


def logits(params: ClassifierParams, x) -> Vector:
    """Per-class scores w_j . x (+ b_j when the bias is enabled)."""
    v = as_vector(x)
    if v.shape[0] != params.dim:
        raise DimensionError(
            f"feature length {v.shape[0]} does not match classifier dim {params.dim}"
        )
    z = params.weights @ v
    if params.use_bias:
        z = z + params.biases
    return z

def batch_logits(params: ClassifierParams, features: np.ndarray) -> np.ndarray:
    """Row-wise logits for a (N, d) feature matrix."""
    if features.ndim != 2 or features.shape[1] != params.dim:
        raise DimensionError(
            f"feature matrix shape {features.shape} does not match classifier dim {params.dim}"
        )
    z = features @ params.weights.T
    if params.use_bias:
        z = z + params.biases[None, :]
    return z


def weight_norms(params: ClassifierParams) -> Vector:
    """Per-class L2 norm of the weight rows."""
    return np.linalg.norm(params.weights, axis=1)


def save_checkpoint(params: ClassifierParams, path) -> None:
    """JSON checkpoint: {K, d, use_bias, weights (row-major), biases}."""
    payload = {
        "K": params.num_classes,
        "d": params.dim,
        "use_bias": params.use_bias,
        "weights": params.weights.ravel().tolist(),
        "biases": params.biases.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_checkpoint(path) -> ClassifierParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    k, d = int(payload["K"]), int(payload["d"])
    weights = np.asarray(payload["weights"], dtype=np.float64).reshape(k, d)
    biases = np.asarray(payload["biases"], dtype=np.float64)
    return ClassifierParams(weights=weights, biases=biases, use_bias=bool(payload["use_bias"]))
