"""Skeleton person re-identification with motif-guided graph transformers."""

from ._mocos import (
    Dataset,
    Model,
    NumericError,
    ParseError,
    ValidationError,
    adjacency,
    cmc,
    config_echo,
    gcm,
    generate,
    gradient_suite,
    hsm,
    layouts,
    load_checkpoint,
    load_dataset,
    match_distances,
    mean_average_precision,
    positional_encoding,
    role_counts,
    train,
)

__all__ = [
    "Dataset",
    "Model",
    "NumericError",
    "ParseError",
    "ValidationError",
    "adjacency",
    "cmc",
    "config_echo",
    "gcm",
    "generate",
    "gradient_suite",
    "hsm",
    "layouts",
    "load_checkpoint",
    "load_dataset",
    "match_distances",
    "mean_average_precision",
    "positional_encoding",
    "role_counts",
    "train",
]
