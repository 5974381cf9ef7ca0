"""Semi-supervised stance detection: Python bindings over the C++ core."""

from ._core import (
    ClassifierParams,
    DataError,
    UsageError,
    canonical_config,
    classify,
    clean_tweet,
    config_hash,
    init_classifier,
    macro_f1,
    majority_vote,
    run_cli,
    supervised_class_weight,
    unsupervised_batch_weight,
)

__all__ = [
    "ClassifierParams",
    "DataError",
    "UsageError",
    "canonical_config",
    "classify",
    "clean_tweet",
    "config_hash",
    "init_classifier",
    "macro_f1",
    "majority_vote",
    "run_cli",
    "supervised_class_weight",
    "unsupervised_batch_weight",
]
