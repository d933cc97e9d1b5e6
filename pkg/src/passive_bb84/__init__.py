"""Asymptotic key rate of decoy-state BB84 with a passive, biased receiver."""

from passive_bb84.model import (
    Intensity,
    ObservedStats,
    ReceiverModel,
    SourceModel,
    SplittingProbs,
    ValidationError,
    splitting_probs,
    validate_receiver,
    validate_source,
)

__all__ = [
    "Intensity",
    "ObservedStats",
    "ReceiverModel",
    "SourceModel",
    "SplittingProbs",
    "ValidationError",
    "splitting_probs",
    "validate_receiver",
    "validate_source",
]

__version__ = "0.1.0"
