"""Mini-batch SGD with momentum and a cosine learning-rate schedule, interleaved with
per-class gradient accumulation and per-epoch diagnostics snapshots.

Determinism contract: the same config and dataset produce bit-identical
parameters, accumulators, and history. Initialization and batch shuffling use
separate seeded streams so runs that differ only in loss kind share both the
starting point and the batch order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, class_mean_features
from .errors import ConfigError, DivergedError
from .gradstats import GradAccumulators, accumulate_batch, floor_epsilon
from .losses import (
    LossKind,
    adjusted_logits_batch,
    grad_logits_batch,
    per_sample_losses,
    softmax_rows,
)
from .model import ClassifierParams, init_params, weight_norms
from .numerics import cosine_similarity


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: LossKind = LossKind.GALA
    epochs: int = 100
    batch_size: int = 64
    base_lr: float = 0.1
    momentum: float = 0.9
    seed: int = 0
    eps_floor: float = 1e-8
    use_bias: bool = False
    tau: float = 1.0  # re-balance temperature, forwarded to evaluation
    init_scale: float = 0.01

    def __post_init__(self):
        try:
            object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        except ValueError:
            raise ConfigError(
                f"loss_kind must be one of {[k.value for k in LossKind]}, "
                f"got {self.loss_kind!r}"
            ) from None
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if self.eps_floor <= 0:
            raise ConfigError(f"eps_floor must be positive, got {self.eps_floor}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.init_scale <= 0:
            raise ConfigError(f"init_scale must be positive, got {self.init_scale}")


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    mean_loss: float
    weight_norms: np.ndarray
    similarity: np.ndarray
    accumulators: GradAccumulators

    def history_dict(self) -> dict:
        """The per-epoch history line: {epoch, lr, mean_loss, weight_norms, similarity}."""
        return {
            "epoch": self.epoch,
            "lr": self.lr,
            "mean_loss": self.mean_loss,
            "weight_norms": self.weight_norms.tolist(),
            "similarity": self.similarity.tolist(),
        }

    def accumulator_dict(self) -> dict:
        """The per-epoch accumulator dump: {epoch, theta, phi, nu, cross}."""
        return {"epoch": self.epoch, **self.accumulators.to_dict()}


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def final(self) -> EpochRecord:
        return self.records[-1]


def cosine_lr(epoch: int, total_epochs: int, base_lr: float) -> float:
    """base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)); decreasing in epoch."""
    if not 0 <= epoch < total_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {total_epochs})")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray, lr: float, momentum: float):
    """In-place momentum update: v <- momentum*v + g; param <- param - lr*v."""
    velocity *= momentum
    velocity += grad
    param -= lr * velocity
    return param, velocity


def train(config: TrainConfig, dataset: Dataset) -> tuple[ClassifierParams, GradAccumulators, TrainHistory]:
    """Run the full training loop and return final parameters, accumulators, and history.

    Margins are frozen per epoch: epoch e >= 1 uses the accumulators as of the
    end of epoch e - 1 (floored at eps_floor), and the first epoch uses
    theta = phi = 1, which makes the adjusted loss coincide with plain
    cross-entropy until statistics exist. Statistics accumulate per sample at
    full magnitude from the probabilities of the adjusted logits; the
    parameter update uses the batch-mean gradient.
    """
    n = dataset.num_samples
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    k = dataset.num_classes
    use_margins = config.loss_kind is LossKind.GALA

    params = init_params(
        k,
        dataset.dim,
        scale=config.init_scale,
        seed=[config.seed, 0],
        use_bias=config.use_bias,
    )
    shuffle_rng = np.random.default_rng([config.seed, 1])

    acc = GradAccumulators.zeros(k)
    margin_theta = np.ones(k)
    margin_phi = np.ones(k)
    velocity_w = np.zeros_like(params.weights)
    velocity_b = np.zeros_like(params.biases)
    class_means = class_mean_features(dataset)

    features = dataset.features
    labels = dataset.labels
    history = TrainHistory()

    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.base_lr)
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0

        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb = features[idx]
            yb = labels[idx]

            # Overflow after a diverging update is reported via the loss check
            # below, not as a runtime warning mid-computation.
            with np.errstate(invalid="ignore", over="ignore"):
                z = xb @ params.weights.T
                if config.use_bias:
                    z = z + params.biases[None, :]
                if use_margins:
                    z = adjusted_logits_batch(z, yb, margin_theta, margin_phi)
                batch_losses = per_sample_losses(z, yb)
                loss_sum += batch_losses.sum()
            # Losses are non-negative, so the running sum is non-finite as soon
            # as any batch loss is.
            if not np.isfinite(loss_sum):
                raise DivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}",
                    epoch=epoch,
                    batch=batch_index,
                )

            probs = softmax_rows(z)
            g = grad_logits_batch(probs, yb)
            weight_grad = g.T @ xb / len(idx)
            sgd_step(params.weights, weight_grad, velocity_w, lr, config.momentum)
            if config.use_bias:
                sgd_step(params.biases, g.mean(axis=0), velocity_b, lr, config.momentum)

            accumulate_batch(acc, probs, yb)

        floor_epsilon(acc, config.eps_floor)
        margin_theta = acc.theta.copy()
        margin_phi = acc.phi.copy()

        similarity = np.array(
            [cosine_similarity(params.weights[j], class_means[j]) for j in range(k)]
        )
        history.records.append(
            EpochRecord(
                epoch=epoch,
                lr=lr,
                mean_loss=loss_sum / n,
                weight_norms=weight_norms(params),
                similarity=similarity,
                accumulators=acc.copy(),
            )
        )

    return params, acc, history
