"""Synthetic long-tailed datasets, CSV ingestion, and head/medium/tail grouping."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, ParseError

HEAD = "head"
MEDIUM = "medium"
TAIL = "tail"

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class LongTailProfile:
    """Exponentially decaying class-count profile with max/min count ratio = imbalance_factor."""

    num_classes: int
    max_count: int
    imbalance_factor: float

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if self.max_count < 1:
            raise ConfigError(f"max_count must be positive, got {self.max_count}")
        if self.imbalance_factor < 1.0:
            raise ConfigError(
                f"imbalance_factor must be >= 1, got {self.imbalance_factor}"
            )
        if round(self.max_count / self.imbalance_factor) < 1:
            raise ConfigError(
                "smallest class count rounds to zero; lower the imbalance factor "
                "or raise max_count"
            )


def longtail_counts(profile: LongTailProfile) -> np.ndarray:
    """Per-class training counts: counts[k] = round(max_count * IF^(-k/(K-1)))."""
    k = np.arange(profile.num_classes, dtype=np.float64)
    decay = profile.imbalance_factor ** (-k / (profile.num_classes - 1))
    return np.rint(profile.max_count * decay).astype(np.int64)


@dataclass(frozen=True)
class Dataset:
    """A fixed feature matrix with integer labels and per-class counts.

    Values are treated as immutable once constructed and may be shared freely
    across threads.
    """

    features: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64
    class_counts: np.ndarray  # (K,) int64
    role: str  # "train" | "test"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise ConfigError("labels must be 1-D with one entry per feature row")
        if not np.all(np.isfinite(self.features)):
            raise ConfigError("features contain NaN or infinity")
        k = len(self.class_counts)
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= k):
            raise ConfigError("labels out of range for the declared class count")
        observed = np.bincount(self.labels, minlength=k)
        if not np.array_equal(observed, self.class_counts):
            raise ConfigError("class_counts do not match the labels")
        if self.role not in (TRAIN, TEST):
            raise ConfigError(f"role must be '{TRAIN}' or '{TEST}', got {self.role!r}")

    @property
    def num_samples(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return len(self.class_counts)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def dataset_from_arrays(features, labels, role: str, num_classes: int | None = None) -> Dataset:
    """Build a Dataset from raw arrays, computing class counts."""
    f = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    k = num_classes if num_classes is not None else (int(y.max()) + 1 if len(y) else 0)
    counts = np.bincount(y, minlength=k) if len(y) else np.zeros(k, dtype=np.int64)
    return Dataset(features=f, labels=y, class_counts=counts.astype(np.int64), role=role)


def synthesize(
    profile: LongTailProfile,
    dim: int,
    separation: float,
    seed: int,
    test_per_class: int = 100,
) -> tuple[Dataset, Dataset]:
    """Gaussian-cluster train/test pair: long-tailed train counts, balanced test.

    Class means are seeded points on the sphere of radius `separation`; samples
    add unit-variance isotropic noise. The same seed reproduces the same arrays
    bit for bit.
    """
    if dim < 2:
        raise ConfigError(f"dim must be >= 2, got {dim}")
    if separation <= 0:
        raise ConfigError(f"separation must be positive, got {separation}")
    if test_per_class < 1:
        raise ConfigError(f"test_per_class must be positive, got {test_per_class}")
    counts = longtail_counts(profile)
    if np.any(counts == 0):
        raise ConfigError("a class count rounded to zero")

    k = profile.num_classes
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(k, dim))
    means = directions * (separation / np.linalg.norm(directions, axis=1)[:, None])

    train_features = np.concatenate(
        [means[j] + rng.normal(size=(counts[j], dim)) for j in range(k)]
    )
    train_labels = np.repeat(np.arange(k, dtype=np.int64), counts)
    test_features = np.concatenate(
        [means[j] + rng.normal(size=(test_per_class, dim)) for j in range(k)]
    )
    test_labels = np.repeat(np.arange(k, dtype=np.int64), test_per_class)

    train = Dataset(train_features, train_labels, counts, role=TRAIN)
    test = Dataset(
        test_features,
        test_labels,
        np.full(k, test_per_class, dtype=np.int64),
        role=TEST,
    )
    return train, test


def write_csv(dataset: Dataset, path) -> None:
    """Write `label,f1,...,fd` rows; float text round-trips bit-exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i + 1}" for i in range(dataset.dim)])
        for label, row in zip(dataset.labels, dataset.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def load_csv(path, role: str = TRAIN, num_classes: int | None = None) -> Dataset:
    """Parse a `label,f1,...,fd` CSV into a Dataset.

    Raises ParseError with the offending line number on ragged rows,
    non-numeric fields, or labels outside [0, num_classes).
    """
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0] != "label":
            raise ParseError(f"{path}: line 1: header must start with 'label'")
        width = len(header)
        if width < 2:
            raise ParseError(f"{path}: line 1: no feature columns")

        labels: list[int] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ParseError(
                    f"{path}: line {line_no}: expected {width} fields, got {len(row)}"
                )
            try:
                label = int(row[0])
            except ValueError:
                raise ParseError(
                    f"{path}: line {line_no}: label {row[0]!r} is not an integer"
                ) from None
            if label < 0:
                raise ParseError(f"{path}: line {line_no}: negative label {label}")
            if num_classes is not None and label >= num_classes:
                raise ParseError(
                    f"{path}: line {line_no}: label {label} >= num_classes {num_classes}"
                )
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError(
                    f"{path}: line {line_no}: non-numeric feature value"
                ) from None
            labels.append(label)
            rows.append(values)

    if not rows:
        raise ParseError(f"{path}: no data rows")
    return dataset_from_arrays(rows, labels, role=role, num_classes=num_classes)


@dataclass(frozen=True)
class GroupAssignment:
    """Per-class head/medium/tail tag derived from training counts."""

    tags: tuple[str, ...]

    def classes(self, tag: str) -> np.ndarray:
        """Indices of the classes carrying `tag`."""
        return np.array([j for j, t in enumerate(self.tags) if t == tag], dtype=np.int64)

    @property
    def num_classes(self) -> int:
        return len(self.tags)


def assign_groups(class_counts, head_threshold: int, tail_threshold: int) -> GroupAssignment:
    """Tag classes: count > head_threshold -> head, count < tail_threshold -> tail, else medium."""
    if head_threshold <= tail_threshold:
        raise ConfigError(
            f"head_threshold ({head_threshold}) must exceed tail_threshold ({tail_threshold})"
        )
    counts = np.asarray(class_counts)
    tags = []
    for count in counts:
        if count > head_threshold:
            tags.append(HEAD)
        elif count < tail_threshold:
            tags.append(TAIL)
        else:
            tags.append(MEDIUM)
    return GroupAssignment(tags=tuple(tags))


def class_mean_features(dataset: Dataset) -> np.ndarray:
    """(K, d) matrix of per-class mean features; every class needs >= 1 sample."""
    k = dataset.num_classes
    if np.any(dataset.class_counts == 0):
        empty = int(np.argmin(dataset.class_counts))
        raise DegenerateInputError(f"class {empty} has no samples")
    means = np.zeros((k, dataset.dim))
    for j in range(k):
        means[j] = dataset.features[dataset.labels == j].mean(axis=0)
    return means
