"""Conversational critiquing recommender with bot-play fine-tuning."""

from ._core import (
    Dataset,
    Diverged,
    Error,
    InvalidInput,
    Model,
    NotFound,
    Rejected,
    Service,
    SessionClosed,
    auc,
    botplay,
    extract_aspects,
    feedback_score,
    load_dataset,
    load_model,
    planted_dataset,
    session,
    simulate,
    train,
)

__all__ = [
    "Dataset",
    "Diverged",
    "Error",
    "InvalidInput",
    "Model",
    "NotFound",
    "Rejected",
    "Service",
    "SessionClosed",
    "auc",
    "botplay",
    "extract_aspects",
    "feedback_score",
    "load_dataset",
    "load_model",
    "planted_dataset",
    "session",
    "simulate",
    "train",
]
