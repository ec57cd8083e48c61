"""Embedding-similarity prompt caching toolkit (C++ core)."""

from ._core import (
    DataError,
    NumericalError,
    SimilarityModel,
    UsageError,
    bce_loss,
    build_hard_dataset,
    caching_efficiency,
    cosine_similarity,
    plant_hard_world,
    read_embeddings,
    roc_auc,
    roc_curve,
    sigmoid,
    simulate,
    sld_loss,
    train,
    write_embeddings,
)

__all__ = [
    "DataError",
    "NumericalError",
    "SimilarityModel",
    "UsageError",
    "bce_loss",
    "build_hard_dataset",
    "caching_efficiency",
    "cosine_similarity",
    "plant_hard_world",
    "read_embeddings",
    "roc_auc",
    "roc_curve",
    "sigmoid",
    "simulate",
    "sld_loss",
    "train",
    "write_embeddings",
]
