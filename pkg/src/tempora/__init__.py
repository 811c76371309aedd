"""Temporal topic modeling with recurrent replicated-softmax models."""

from .corpus import (
    Document,
    TemporalCorpus,
    TimeSlice,
    Vocabulary,
    ingest,
    serialize,
    split_fraction,
    split_held_out,
)
from .estimators import DynamicTopicModel
from .replicated_softmax import (
    RsmGradient,
    RsmParams,
    SliceBiases,
    cd_gradient,
    free_energy,
    hidden_activation,
    sample_document,
    visible_distribution,
)
from .temporal_model import (
    ForwardState,
    TemporalGradient,
    TemporalModelParams,
    forward,
    sequence_gradient,
    tanh_backward,
)
from .training import (
    Checkpoint,
    TrainConfig,
    TrainingDiverged,
    VocabularyMismatchError,
    train,
    train_static_rsm,
    warm_start,
)

__version__ = "0.1.0"

__all__ = [
    "Vocabulary", "Document", "TimeSlice", "TemporalCorpus",
    "ingest", "serialize", "split_held_out", "split_fraction",
    "RsmParams", "SliceBiases", "RsmGradient",
    "hidden_activation", "visible_distribution", "sample_document",
    "free_energy", "cd_gradient",
    "TemporalModelParams", "TemporalGradient", "ForwardState",
    "forward", "sequence_gradient", "tanh_backward",
    "TrainConfig", "Checkpoint", "train", "train_static_rsm", "warm_start",
    "TrainingDiverged", "VocabularyMismatchError",
    "DynamicTopicModel",
    "__version__",
]
