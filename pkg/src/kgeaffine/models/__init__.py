"""Scoring families: specs, tables, scores, and analytic gradients."""

from .base import (
    FAMILIES,
    EmbeddingTable,
    ModelSpec,
    core_shape,
    entity_width,
    grad,
    grad_batch,
    init_embeddings,
    relation_width,
    score,
    score_batch,
    score_candidates,
)
from . import compound, distance, semantic  # noqa: F401  (register families)
from .compound import params_from_row

__all__ = [
    "FAMILIES",
    "EmbeddingTable",
    "ModelSpec",
    "core_shape",
    "entity_width",
    "grad",
    "grad_batch",
    "init_embeddings",
    "params_from_row",
    "relation_width",
    "score",
    "score_batch",
    "score_candidates",
]
