"""Experiment command line: training runs, post-hoc re-balancing, paired loss
comparisons, and synthetic dataset emission.

Every run writes a manifest.json holding the fully-resolved configuration;
re-running from a manifest reproduces all outputs byte for byte. The output
directory is chosen by --out, then the GALA_OUT environment variable, then the
config's output.dir.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import (
    TAIL,
    Dataset,
    GroupAssignment,
    LongTailProfile,
    assign_groups,
    load_csv,
    longtail_counts,
    synthesize,
    write_csv,
)
from .errors import ConfigError, GalaError
from .evaluation import EvalReport, evaluate, write_per_class_csv
from .gradstats import GradAccumulators, gradient_ratio
from .losses import LossKind, softmax_rows
from .model import ClassifierParams, batch_logits, save_checkpoint
from .rebalance import (
    predict,
    read_probability_csv,
    rebalance,
    validate_prediction_matrix,
    write_probability_csv,
)
from .trainer import TrainConfig, TrainHistory, train

_MISSING = object()

KNOWN_FORMATS = ("json", "csv")

PRESETS: dict[str, dict] = {
    # Seeded long-tailed benchmark: 10 Gaussian classes, imbalance factor 100.
    "paper-analysis": {
        "data": {
            "synthetic": {
                "num_classes": 10,
                "max_count": 500,
                "imbalance_factor": 100.0,
                "dim": 16,
                "separation": 2.5,
                "seed": 20240,
                "test_per_class": 100,
            }
        },
        "train": {
            "loss": "gala",
            "epochs": 100,
            "batch_size": 64,
            "base_lr": 0.1,
            "momentum": 0.9,
            "seed": 20240,
            "eps_floor": 1e-8,
            "use_bias": False,
            "tau": 1.0,
            "init_scale": 0.01,
        },
        "groups": {"head_threshold": 100, "tail_threshold": 20},
        "output": {"dir": None, "formats": ["json", "csv"]},
    }
}


# ---------------------------------------------------------------------------
# Configuration parsing (strict: unknown keys are rejected).


@dataclass(frozen=True)
class SyntheticSource:
    num_classes: int
    max_count: int
    imbalance_factor: float
    dim: int
    separation: float
    seed: int
    test_per_class: int

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "max_count": self.max_count,
            "imbalance_factor": self.imbalance_factor,
            "dim": self.dim,
            "separation": self.separation,
            "seed": self.seed,
            "test_per_class": self.test_per_class,
        }


@dataclass(frozen=True)
class CsvSource:
    train_path: str
    test_path: str
    num_classes: int | None = None

    def to_dict(self) -> dict:
        return {
            "train": self.train_path,
            "test": self.test_path,
            "num_classes": self.num_classes,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    source: SyntheticSource | CsvSource
    train: TrainConfig
    head_threshold: int
    tail_threshold: int
    output_dir: str | None
    formats: tuple[str, ...]

    def to_manifest(self) -> dict:
        if isinstance(self.source, SyntheticSource):
            data_section = {"synthetic": self.source.to_dict()}
        else:
            data_section = {"csv": self.source.to_dict()}
        return {
            "data": data_section,
            "train": {
                "loss": self.train.loss_kind.value,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "base_lr": self.train.base_lr,
                "momentum": self.train.momentum,
                "seed": self.train.seed,
                "eps_floor": self.train.eps_floor,
                "use_bias": self.train.use_bias,
                "tau": self.train.tau,
                "init_scale": self.train.init_scale,
            },
            "groups": {
                "head_threshold": self.head_threshold,
                "tail_threshold": self.tail_threshold,
            },
            "output": {"dir": self.output_dir, "formats": list(self.formats)},
        }


def _require_mapping(obj, context: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context} must be a JSON object")
    return dict(obj)


def _pop(mapping: dict, key: str, context: str, default=_MISSING):
    if key in mapping:
        return mapping.pop(key)
    if default is _MISSING:
        raise ConfigError(f"missing required key {context}.{key}")
    return default


def _reject_unknown(mapping: dict, context: str) -> None:
    if mapping:
        unknown = ", ".join(sorted(mapping))
        raise ConfigError(f"unknown key(s) under {context}: {unknown}")


def _parse_synthetic(section: dict) -> SyntheticSource:
    s = _require_mapping(section, "data.synthetic")
    source = SyntheticSource(
        num_classes=int(_pop(s, "num_classes", "data.synthetic")),
        max_count=int(_pop(s, "max_count", "data.synthetic")),
        imbalance_factor=float(_pop(s, "imbalance_factor", "data.synthetic")),
        dim=int(_pop(s, "dim", "data.synthetic")),
        separation=float(_pop(s, "separation", "data.synthetic")),
        seed=int(_pop(s, "seed", "data.synthetic")),
        test_per_class=int(_pop(s, "test_per_class", "data.synthetic", 100)),
    )
    _reject_unknown(s, "data.synthetic")
    return source


def _parse_csv_source(section: dict) -> CsvSource:
    s = _require_mapping(section, "data.csv")
    num_classes = _pop(s, "num_classes", "data.csv", None)
    source = CsvSource(
        train_path=str(_pop(s, "train", "data.csv")),
        test_path=str(_pop(s, "test", "data.csv")),
        num_classes=None if num_classes is None else int(num_classes),
    )
    _reject_unknown(s, "data.csv")
    return source


def _parse_train(section: dict) -> TrainConfig:
    s = _require_mapping(section, "train")
    defaults = TrainConfig()
    loss_value = _pop(s, "loss", "train", defaults.loss_kind.value)
    try:
        loss_kind = LossKind(loss_value)
    except ValueError:
        raise ConfigError(
            f"train.loss must be one of {[k.value for k in LossKind]}, got {loss_value!r}"
        ) from None
    config = TrainConfig(
        loss_kind=loss_kind,
        epochs=int(_pop(s, "epochs", "train", defaults.epochs)),
        batch_size=int(_pop(s, "batch_size", "train", defaults.batch_size)),
        base_lr=float(_pop(s, "base_lr", "train", defaults.base_lr)),
        momentum=float(_pop(s, "momentum", "train", defaults.momentum)),
        seed=int(_pop(s, "seed", "train", defaults.seed)),
        eps_floor=float(_pop(s, "eps_floor", "train", defaults.eps_floor)),
        use_bias=bool(_pop(s, "use_bias", "train", defaults.use_bias)),
        tau=float(_pop(s, "tau", "train", defaults.tau)),
        init_scale=float(_pop(s, "init_scale", "train", defaults.init_scale)),
    )
    _reject_unknown(s, "train")
    return config


def parse_config(payload: dict) -> ExperimentConfig:
    top = _require_mapping(payload, "config")

    data_section = _require_mapping(_pop(top, "data", "config"), "data")
    has_synth = "synthetic" in data_section
    has_csv = "csv" in data_section
    if has_synth == has_csv:
        raise ConfigError("data must contain exactly one of 'synthetic' or 'csv'")
    if has_synth:
        source: SyntheticSource | CsvSource = _parse_synthetic(data_section.pop("synthetic"))
    else:
        source = _parse_csv_source(data_section.pop("csv"))
    _reject_unknown(data_section, "data")

    train_config = _parse_train(_pop(top, "train", "config", {}))

    groups_section = _require_mapping(_pop(top, "groups", "config"), "groups")
    head_threshold = int(_pop(groups_section, "head_threshold", "groups"))
    tail_threshold = int(_pop(groups_section, "tail_threshold", "groups"))
    _reject_unknown(groups_section, "groups")
    if head_threshold <= tail_threshold:
        raise ConfigError("groups.head_threshold must exceed groups.tail_threshold")

    output_section = _require_mapping(_pop(top, "output", "config", {}), "output")
    output_dir = _pop(output_section, "dir", "output", None)
    formats = _pop(output_section, "formats", "output", list(KNOWN_FORMATS))
    _reject_unknown(output_section, "output")
    if not isinstance(formats, (list, tuple)) or not formats:
        raise ConfigError("output.formats must be a non-empty list")
    for fmt in formats:
        if fmt not in KNOWN_FORMATS:
            raise ConfigError(f"unknown report format {fmt!r}; known: {list(KNOWN_FORMATS)}")

    _reject_unknown(top, "config")
    return ExperimentConfig(
        source=source,
        train=train_config,
        head_threshold=head_threshold,
        tail_threshold=tail_threshold,
        output_dir=None if output_dir is None else str(output_dir),
        formats=tuple(formats),
    )


def load_config_file(path) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(payload)


def _config_from_args(args) -> ExperimentConfig:
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; known: {sorted(PRESETS)}")
        return parse_config(json.loads(json.dumps(PRESETS[args.preset])))
    return load_config_file(args.config)


def _resolve_out_dir(flag_value: str | None, config_dir: str | None) -> Path:
    for candidate in (flag_value, os.environ.get("GALA_OUT"), config_dir):
        if candidate:
            return Path(candidate)
    raise ConfigError("no output directory: pass --out, set GALA_OUT, or set output.dir")


# ---------------------------------------------------------------------------
# Run execution and report emission.


@dataclass
class RunResult:
    params: ClassifierParams
    acc: GradAccumulators
    history: TrainHistory
    groups: GroupAssignment
    train_counts: np.ndarray
    probs: np.ndarray
    truth: np.ndarray
    eval_raw: EvalReport
    eval_rebalanced: EvalReport
    tau: float


def _load_datasets(source: SyntheticSource | CsvSource) -> tuple[Dataset, Dataset]:
    if isinstance(source, SyntheticSource):
        profile = LongTailProfile(
            num_classes=source.num_classes,
            max_count=source.max_count,
            imbalance_factor=source.imbalance_factor,
        )
        return synthesize(
            profile,
            dim=source.dim,
            separation=source.separation,
            seed=source.seed,
            test_per_class=source.test_per_class,
        )
    train_ds = load_csv(source.train_path, role="train", num_classes=source.num_classes)
    test_ds = load_csv(source.test_path, role="test", num_classes=train_ds.num_classes)
    if test_ds.dim != train_ds.dim:
        raise ConfigError(
            f"train dim {train_ds.dim} does not match test dim {test_ds.dim}"
        )
    return train_ds, test_ds


def run_experiment(config: ExperimentConfig, loss_kind: LossKind | None = None) -> RunResult:
    """Data -> train -> evaluate, with and without re-balancing at the configured tau."""
    train_ds, test_ds = _load_datasets(config.source)
    train_config = config.train if loss_kind is None else replace(config.train, loss_kind=loss_kind)
    params, acc, history = train(train_config, train_ds)
    groups = assign_groups(train_ds.class_counts, config.head_threshold, config.tail_threshold)
    probs = softmax_rows(batch_logits(params, test_ds.features))
    eval_raw = evaluate(predict(probs), test_ds.labels, groups)
    eval_rebalanced = evaluate(
        predict(rebalance(probs, train_config.tau)), test_ds.labels, groups
    )
    return RunResult(
        params=params,
        acc=acc,
        history=history,
        groups=groups,
        train_counts=train_ds.class_counts,
        probs=probs,
        truth=test_ds.labels,
        eval_raw=eval_raw,
        eval_rebalanced=eval_rebalanced,
        tau=train_config.tau,
    )


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, lines: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")


def _write_curve_csv(path: Path, history: TrainHistory, values_for_record) -> None:
    k = len(values_for_record(history.records[0]))
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(["epoch"] + [f"class_{j}" for j in range(k)]) + "\n")
        for record in history.records:
            values = values_for_record(record)
            fh.write(",".join([str(record.epoch)] + [repr(float(v)) for v in values]) + "\n")


def _write_labels(path: Path, labels: np.ndarray) -> None:
    path.write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


def _read_labels(path) -> np.ndarray:
    try:
        return np.array(
            [int(line) for line in Path(path).read_text(encoding="utf-8").split()],
            dtype=np.int64,
        )
    except ValueError:
        raise ConfigError(f"{path}: labels must be one integer per line") from None


def write_run_outputs(out: Path, result: RunResult, formats: tuple[str, ...]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, out / "checkpoint.json")
    _write_jsonl(out / "history.jsonl", [r.history_dict() for r in result.history.records])
    _write_jsonl(out / "accumulators.jsonl", [r.accumulator_dict() for r in result.history.records])
    _write_json(
        out / "eval.json",
        {
            "tau": result.tau,
            "raw": result.eval_raw.to_dict(),
            "rebalanced": result.eval_rebalanced.to_dict(),
        },
    )
    write_probability_csv(result.probs, out / "probs.csv")
    _write_labels(out / "truth.csv", result.truth)
    _write_labels(out / "class_counts.csv", result.train_counts)
    _write_curve_csv(
        out / "gradient_ratio.csv",
        result.history,
        lambda record: gradient_ratio(record.accumulators),
    )
    _write_curve_csv(
        out / "phi_distribution.csv", result.history, lambda record: record.accumulators.phi
    )
    _write_curve_csv(out / "similarity.csv", result.history, lambda record: record.similarity)
    if "csv" in formats:
        rows = []
        for j in range(result.groups.num_classes):
            rows.append(
                {
                    "class": j,
                    "train_count": int(result.train_counts[j]),
                    "group": result.groups.tags[j],
                    "accuracy": repr(float(result.eval_raw.per_class_accuracy[j])),
                    "accuracy_rebalanced": repr(
                        float(result.eval_rebalanced.per_class_accuracy[j])
                    ),
                    "positive_predictions": int(result.eval_raw.positive_prediction_counts[j]),
                    "positive_predictions_rebalanced": int(
                        result.eval_rebalanced.positive_prediction_counts[j]
                    ),
                }
            )
        write_per_class_csv(
            out / "per_class.csv",
            rows,
            [
                "class",
                "train_count",
                "group",
                "accuracy",
                "accuracy_rebalanced",
                "positive_predictions",
                "positive_predictions_rebalanced",
            ],
        )


def _run_summary(result: RunResult) -> dict:
    ratio = gradient_ratio(result.acc)
    tail_classes = result.groups.classes(TAIL)
    final_similarity = result.history.final().similarity
    return {
        "top1": result.eval_raw.top1,
        "top1_rebalanced": result.eval_rebalanced.top1,
        "group_accuracy": dict(result.eval_raw.group_accuracy),
        "group_accuracy_rebalanced": dict(result.eval_rebalanced.group_accuracy),
        "gradient_ratio_spread": float(ratio.max() / ratio.min()),
        "tail_similarity_mean": (
            float(final_similarity[tail_classes].mean()) if len(tail_classes) else None
        ),
    }


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_train(args) -> int:
    config = _config_from_args(args)
    out = _resolve_out_dir(args.out, config.output_dir)
    result = run_experiment(config)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", config.to_manifest())
    write_run_outputs(out, result, config.formats)
    print(
        f"loss={config.train.loss_kind.value} top1={result.eval_raw.top1:.4f} "
        f"top1_rebalanced={result.eval_rebalanced.top1:.4f} out={out}"
    )
    return 0


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    out = _resolve_out_dir(args.out, config.output_dir)
    results = {
        kind.value: run_experiment(config, loss_kind=kind)
        for kind in (LossKind.CROSS_ENTROPY, LossKind.GALA)
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", config.to_manifest())
    summaries = {}
    for name, result in results.items():
        write_run_outputs(out / name, result, config.formats)
        summaries[name] = _run_summary(result)

    ce, ga = summaries["cross_entropy"], summaries["gala"]
    deltas = {
        "top1": ga["top1"] - ce["top1"],
        "gradient_ratio_spread": ga["gradient_ratio_spread"] - ce["gradient_ratio_spread"],
    }
    for tag in ce["group_accuracy"]:
        if tag in ga["group_accuracy"]:
            deltas[f"{tag}_accuracy"] = ga["group_accuracy"][tag] - ce["group_accuracy"][tag]
    if ce["tail_similarity_mean"] is not None and ga["tail_similarity_mean"] is not None:
        deltas["tail_similarity"] = ga["tail_similarity_mean"] - ce["tail_similarity_mean"]
    _write_json(
        out / "compare.json",
        {"cross_entropy": ce, "gala": ga, "deltas": deltas},
    )
    print(
        f"cross_entropy top1={ce['top1']:.4f} gala top1={ga['top1']:.4f} "
        f"delta={deltas['top1']:+.4f} out={out}"
    )
    return 0


def cmd_rebalance(args) -> int:
    probs = validate_prediction_matrix(read_probability_csv(args.probs))
    truth = None
    groups = None
    if args.truth is not None:
        truth = _read_labels(args.truth)
        if len(truth) != len(probs):
            raise ConfigError(
                f"{len(truth)} truth labels for {len(probs)} probability rows"
            )
    if args.counts is not None:
        if args.head_threshold is None or args.tail_threshold is None:
            raise ConfigError("--counts requires --head-threshold and --tail-threshold")
        counts = _read_labels(args.counts)
        if len(counts) != probs.shape[1]:
            raise ConfigError(
                f"{len(counts)} class counts for {probs.shape[1]} probability columns"
            )
        groups = assign_groups(counts, args.head_threshold, args.tail_threshold)

    rebalanced = rebalance(probs, args.tau)
    predictions = predict(rebalanced)

    out = _resolve_out_dir(args.out, None)
    out.mkdir(parents=True, exist_ok=True)
    write_probability_csv(rebalanced, out / "rebalanced.csv")
    _write_labels(out / "predictions.csv", predictions)
    if truth is not None:
        baseline = evaluate(predict(probs), truth, groups)
        adjusted = evaluate(predictions, truth, groups)
        _write_json(
            out / "rebalance_eval.json",
            {
                "tau": args.tau,
                "baseline": baseline.to_dict(),
                "rebalanced": adjusted.to_dict(),
            },
        )
        print(
            f"tau={args.tau} top1_baseline={baseline.top1:.4f} "
            f"top1_rebalanced={adjusted.top1:.4f} out={out}"
        )
    else:
        print(f"tau={args.tau} rows={len(rebalanced)} out={out}")
    return 0


def cmd_synth(args) -> int:
    profile = LongTailProfile(
        num_classes=args.k, max_count=args.nmax, imbalance_factor=args.imbalance_factor
    )
    train_ds, test_ds = synthesize(
        profile,
        dim=args.dim,
        separation=args.separation,
        seed=args.seed,
        test_per_class=args.test_per_class,
    )
    out = _resolve_out_dir(args.out, None)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(train_ds, out / "train.csv")
    write_csv(test_ds, out / "test.csv")
    _write_json(
        out / "meta.json",
        {
            "num_classes": profile.num_classes,
            "max_count": profile.max_count,
            "imbalance_factor": profile.imbalance_factor,
            "dim": args.dim,
            "separation": args.separation,
            "seed": args.seed,
            "test_per_class": args.test_per_class,
            "train_counts": longtail_counts(profile).tolist(),
        },
    )
    print(f"wrote {train_ds.num_samples} train / {test_ds.num_samples} test rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gala",
        description="Gradient-aware logit adjustment experiments on long-tailed data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="JSON experiment config file")
        group.add_argument("--preset", help=f"built-in config, one of {sorted(PRESETS)}")
        p.add_argument("--out", help="output directory (overrides GALA_OUT and config)")

    p_train = sub.add_parser("train", help="train one classifier and write reports")
    add_config_args(p_train)
    p_train.set_defaults(func=cmd_train)

    p_compare = sub.add_parser(
        "compare", help="train cross-entropy and gala with shared seed/batch order"
    )
    add_config_args(p_compare)
    p_compare.set_defaults(func=cmd_compare)

    p_rebalance = sub.add_parser("rebalance", help="re-balance a probability CSV")
    p_rebalance.add_argument("--probs", required=True, help="probability matrix CSV")
    p_rebalance.add_argument("--tau", required=True, type=float, help="temperature >= 0")
    p_rebalance.add_argument("--truth", help="true labels, one integer per line")
    p_rebalance.add_argument("--counts", help="per-class training counts, one per line")
    p_rebalance.add_argument("--head-threshold", type=int)
    p_rebalance.add_argument("--tail-threshold", type=int)
    p_rebalance.add_argument("--out", help="output directory")
    p_rebalance.set_defaults(func=cmd_rebalance)

    p_synth = sub.add_parser("synth", help="emit a synthetic long-tailed dataset as CSV")
    p_synth.add_argument("--k", required=True, type=int, help="number of classes")
    p_synth.add_argument(
        "--if", dest="imbalance_factor", required=True, type=float, help="imbalance factor"
    )
    p_synth.add_argument("--nmax", required=True, type=int, help="largest class count")
    p_synth.add_argument("--dim", required=True, type=int, help="feature dimension")
    p_synth.add_argument("--seed", required=True, type=int)
    p_synth.add_argument("--separation", type=float, default=2.0)
    p_synth.add_argument("--test-per-class", type=int, default=100)
    p_synth.add_argument("--out", help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GalaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
