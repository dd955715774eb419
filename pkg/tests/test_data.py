import numpy as np
import pytest

from gala.data import (
    HEAD,
    MEDIUM,
    TAIL,
    LongTailProfile,
    assign_groups,
    class_mean_features,
    dataset_from_arrays,
    load_csv,
    longtail_counts,
    synthesize,
    write_csv,
)
from gala.errors import ConfigError, DegenerateInputError, ParseError

BENCH = LongTailProfile(num_classes=10, max_count=500, imbalance_factor=100.0)

# round(500 * 100^(-k/9)) for k = 0..9, evaluated by hand with the decay formula
BENCH_COUNTS = [500, 300, 180, 108, 65, 39, 23, 14, 8, 5]


def test_longtail_counts_endpoints():
    profile = LongTailProfile(num_classes=2, max_count=100, imbalance_factor=100.0)
    assert longtail_counts(profile).tolist() == [100, 1]


def test_longtail_counts_balanced():
    profile = LongTailProfile(num_classes=3, max_count=100, imbalance_factor=1.0)
    assert longtail_counts(profile).tolist() == [100, 100, 100]


def test_longtail_counts_benchmark_profile():
    counts = longtail_counts(BENCH)
    assert counts.tolist() == BENCH_COUNTS
    assert counts[5] == 39


def test_longtail_counts_non_increasing_and_ratio():
    rng = np.random.default_rng(21)
    for _ in range(50):
        profile = LongTailProfile(
            num_classes=int(rng.integers(2, 30)),
            max_count=int(rng.integers(50, 2000)),
            imbalance_factor=float(rng.uniform(1, 50)),
        )
        counts = longtail_counts(profile)
        assert np.all(np.diff(counts) <= 0)
        assert counts[0] == profile.max_count
        assert counts[-1] == round(profile.max_count / profile.imbalance_factor)


def test_profile_validation():
    with pytest.raises(ConfigError):
        LongTailProfile(num_classes=1, max_count=100, imbalance_factor=10.0)
    with pytest.raises(ConfigError):
        LongTailProfile(num_classes=5, max_count=100, imbalance_factor=0.5)
    with pytest.raises(ConfigError):
        # smallest class rounds to zero
        LongTailProfile(num_classes=5, max_count=10, imbalance_factor=100.0)


def test_synthesize_deterministic():
    a_train, a_test = synthesize(BENCH, dim=6, separation=2.0, seed=42, test_per_class=20)
    b_train, b_test = synthesize(BENCH, dim=6, separation=2.0, seed=42, test_per_class=20)
    assert np.array_equal(a_train.features, b_train.features)
    assert np.array_equal(a_test.features, b_test.features)
    assert np.array_equal(a_train.labels, b_train.labels)

    c_train, _ = synthesize(BENCH, dim=6, separation=2.0, seed=43, test_per_class=20)
    assert not np.array_equal(a_train.features, c_train.features)


def test_synthesize_balanced_profile():
    profile = LongTailProfile(num_classes=4, max_count=30, imbalance_factor=1.0)
    train, test = synthesize(profile, dim=3, separation=1.5, seed=0, test_per_class=10)
    assert train.class_counts.tolist() == [30, 30, 30, 30]
    assert test.class_counts.tolist() == [10, 10, 10, 10]
    assert test.role == "test"


def test_synthesize_benchmark_total():
    train, test = synthesize(BENCH, dim=16, separation=2.0, seed=7, test_per_class=100)
    assert train.num_samples == sum(BENCH_COUNTS)
    assert train.class_counts.tolist() == BENCH_COUNTS
    assert test.num_samples == 1000


def test_synthesize_validation():
    with pytest.raises(ConfigError):
        synthesize(BENCH, dim=1, separation=2.0, seed=0)
    with pytest.raises(ConfigError):
        synthesize(BENCH, dim=4, separation=0.0, seed=0)


def test_csv_round_trip_bit_exact(tmp_path):
    train, _ = synthesize(BENCH, dim=5, separation=2.0, seed=3, test_per_class=5)
    path = tmp_path / "train.csv"
    write_csv(train, path)
    loaded = load_csv(path, role="train")
    assert np.array_equal(loaded.features, train.features)
    assert np.array_equal(loaded.labels, train.labels)
    assert np.array_equal(loaded.class_counts, train.class_counts)


def test_load_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"

    path.write_text("label,f1,f2\n0,1.0\n", encoding="utf-8")
    with pytest.raises(ParseError, match="line 2"):
        load_csv(path)

    path.write_text("label,f1,f2\n0,1.0,oops\n", encoding="utf-8")
    with pytest.raises(ParseError, match="line 2"):
        load_csv(path)

    path.write_text("label,f1,f2\n7,1.0,2.0\n", encoding="utf-8")
    with pytest.raises(ParseError, match="label 7"):
        load_csv(path, num_classes=3)

    path.write_text("f1,f2\n1.0,2.0\n", encoding="utf-8")
    with pytest.raises(ParseError, match="header"):
        load_csv(path)

    path.write_text("label,f1,f2\n", encoding="utf-8")
    with pytest.raises(ParseError, match="no data rows"):
        load_csv(path)


def test_assign_groups_simple():
    assert assign_groups([100, 1], 50, 10).tags == (HEAD, TAIL)
    assert assign_groups([20, 20, 20], 50, 10).tags == (MEDIUM, MEDIUM, MEDIUM)


def test_assign_groups_benchmark_thresholds():
    groups = assign_groups(BENCH_COUNTS, 100, 20)
    assert groups.classes(HEAD).tolist() == [0, 1, 2, 3]
    assert groups.classes(TAIL).tolist() == [7, 8, 9]
    assert groups.classes(MEDIUM).tolist() == [4, 5, 6]


def test_assign_groups_threshold_order():
    with pytest.raises(ConfigError):
        assign_groups([10, 5], 10, 10)


def test_class_mean_features():
    ds = dataset_from_arrays(
        [[0.0, 0.0], [2.0, 2.0], [1.0, -1.0]], [0, 0, 1], role="train"
    )
    means = class_mean_features(ds)
    np.testing.assert_allclose(means, [[1.0, 1.0], [1.0, -1.0]])


def test_class_mean_features_empty_class():
    ds = dataset_from_arrays([[1.0, 2.0]], [0], role="train", num_classes=2)
    with pytest.raises(DegenerateInputError):
        class_mean_features(ds)
