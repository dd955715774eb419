"""Accuracy metrics, group-wise breakdowns, and weight-feature similarity diagnostics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import HEAD, TAIL, Dataset, GroupAssignment, class_mean_features
from .errors import DegenerateInputError, DimensionError, DomainError
from .model import ClassifierParams
from .numerics import cosine_similarity


@dataclass
class EvalReport:
    top1: float
    per_class_accuracy: np.ndarray
    group_accuracy: dict[str, float]
    positive_prediction_counts: np.ndarray
    confusion: np.ndarray  # (K, K) counts, rows = truth, columns = prediction

    def to_dict(self) -> dict:
        return {
            "top1": self.top1,
            "per_class_accuracy": self.per_class_accuracy.tolist(),
            "group_accuracy": dict(self.group_accuracy),
            "positive_prediction_counts": self.positive_prediction_counts.tolist(),
            "confusion": self.confusion.tolist(),
        }


def evaluate(pred, truth, groups: GroupAssignment | None = None) -> EvalReport:
    """Top-1 and per-class accuracy, group means, prediction counts, confusion matrix.

    Group accuracies are unweighted means of the per-class accuracies inside
    each group; when no group assignment is supplied they are omitted.
    """
    p = np.asarray(pred, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise DimensionError(f"prediction/truth shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise DimensionError("nothing to evaluate")
    k = groups.num_classes if groups is not None else int(max(p.max(), t.max())) + 1
    if p.min() < 0 or t.min() < 0 or p.max() >= k or t.max() >= k:
        raise DomainError(f"labels out of range for {k} classes")

    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (t, p), 1)
    truth_counts = confusion.sum(axis=1)
    correct = np.diag(confusion)
    with np.errstate(invalid="ignore"):
        per_class = np.where(truth_counts > 0, correct / truth_counts, np.nan)

    group_accuracy: dict[str, float] = {}
    if groups is not None:
        for tag in dict.fromkeys(groups.tags):
            members = groups.classes(tag)
            values = per_class[members]
            values = values[~np.isnan(values)]
            if len(values):
                group_accuracy[tag] = float(values.mean())

    return EvalReport(
        top1=float(correct.sum()) / len(t),
        per_class_accuracy=per_class,
        group_accuracy=group_accuracy,
        positive_prediction_counts=confusion.sum(axis=0),
        confusion=confusion,
    )


def similarity_report(params: ClassifierParams, dataset: Dataset) -> np.ndarray:
    """Cosine similarity between each class weight and the mean feature of its class."""
    means = class_mean_features(dataset)
    if params.num_classes != dataset.num_classes:
        raise DimensionError(
            f"classifier has {params.num_classes} classes, dataset {dataset.num_classes}"
        )
    return np.array(
        [cosine_similarity(params.weights[j], means[j]) for j in range(params.num_classes)]
    )


@dataclass
class CrossSimilarity:
    """Mean cosine similarity of each class weight to head-group and tail-group sample
    features, own-class samples excluded."""

    to_head: np.ndarray
    to_tail: np.ndarray

    def to_dict(self) -> dict:
        return {"to_head": self.to_head.tolist(), "to_tail": self.to_tail.tolist()}


def cross_similarity_report(
    params: ClassifierParams, dataset: Dataset, groups: GroupAssignment
) -> CrossSimilarity:
    head_classes = set(groups.classes(HEAD).tolist())
    tail_classes = set(groups.classes(TAIL).tolist())
    if not head_classes or not tail_classes:
        raise DegenerateInputError("needs at least one head and one tail class")

    feature_norms = np.linalg.norm(dataset.features, axis=1)
    weight_norms_ = np.linalg.norm(params.weights, axis=1)
    if np.any(feature_norms == 0) or np.any(weight_norms_ == 0):
        raise DegenerateInputError("zero-norm feature or weight vector")
    sims = (dataset.features @ params.weights.T) / feature_norms[:, None] / weight_norms_[None, :]

    k = params.num_classes
    to_head = np.zeros(k)
    to_tail = np.zeros(k)
    head_mask = np.isin(dataset.labels, sorted(head_classes))
    tail_mask = np.isin(dataset.labels, sorted(tail_classes))
    for j in range(k):
        own = dataset.labels == j
        for mask, out in ((head_mask, to_head), (tail_mask, to_tail)):
            selected = mask & ~own
            if not selected.any():
                raise DegenerateInputError(
                    f"no samples left for class {j} after excluding its own group slice"
                )
            out[j] = sims[selected, j].mean()
    return CrossSimilarity(to_head=to_head, to_tail=to_tail)


def write_per_class_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    """Per-class table as CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
