"""Self-contained numeric core: biLSTM classifier, Adam, plateau schedule."""

from .lstm import (
    BiLstmModel,
    backward,
    bilstm_forward,
    cross_entropy,
    init_model,
    param_names,
    predict,
    softmax,
)
from .optim import AdamState, PlateauScheduler, adam_step
from .training import (
    SequenceBatch,
    TrainConfig,
    TrainLog,
    load_model,
    save_model,
    train,
)

__all__ = [
    "AdamState",
    "BiLstmModel",
    "PlateauScheduler",
    "SequenceBatch",
    "TrainConfig",
    "TrainLog",
    "adam_step",
    "backward",
    "bilstm_forward",
    "cross_entropy",
    "init_model",
    "load_model",
    "param_names",
    "predict",
    "save_model",
    "softmax",
    "train",
]
