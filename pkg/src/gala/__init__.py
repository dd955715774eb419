"""Gradient-aware logit adjustment training and post-hoc prediction re-balancing
for long-tailed classification."""

from .data import (
    Dataset,
    GroupAssignment,
    LongTailProfile,
    assign_groups,
    load_csv,
    longtail_counts,
    synthesize,
    write_csv,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    DivergedError,
    DomainError,
    GalaError,
    ParseError,
)
from .evaluation import (
    CrossSimilarity,
    EvalReport,
    cross_similarity_report,
    evaluate,
    similarity_report,
)
from .gradstats import (
    GradAccumulators,
    accumulate,
    accumulate_batch,
    floor_epsilon,
    gradient_ratio,
    produced_negative_distribution,
)
from .losses import LossKind, gala_adjust, grad_logits, grad_params, loss
from .model import (
    ClassifierParams,
    batch_logits,
    init_params,
    load_checkpoint,
    logits,
    save_checkpoint,
    weight_norms,
)
from .numerics import cosine_similarity, dot, softmax
from .rebalance import predict, rebalance
from .trainer import TrainConfig, TrainHistory, cosine_lr, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "ClassifierParams",
    "ConfigError",
    "CrossSimilarity",
    "Dataset",
    "DegenerateInputError",
    "DimensionError",
    "DivergedError",
    "DomainError",
    "EvalReport",
    "GalaError",
    "GradAccumulators",
    "GroupAssignment",
    "LongTailProfile",
    "LossKind",
    "ParseError",
    "TrainConfig",
    "TrainHistory",
    "accumulate",
    "accumulate_batch",
    "assign_groups",
    "batch_logits",
    "cosine_lr",
    "cosine_similarity",
    "cross_similarity_report",
    "dot",
    "evaluate",
    "floor_epsilon",
    "gala_adjust",
    "grad_logits",
    "grad_params",
    "gradient_ratio",
    "init_params",
    "load_checkpoint",
    "load_csv",
    "logits",
    "longtail_counts",
    "loss",
    "predict",
    "produced_negative_distribution",
    "rebalance",
    "save_checkpoint",
    "sgd_step",
    "similarity_report",
    "softmax",
    "synthesize",
    "train",
    "weight_norms",
    "write_csv",
]
