"""From-scratch sequence-learning engine (RNN, LSTM, BiLSTM, GRU, and an
attention+GRU variant) with hand-derived gradients and Adam training."""

from .backend import available_backends, backend_name, get_kernels, set_backend, use_backend
from .config import ARCHITECTURES, FEATURE_SETS, NetConfig
from .models import (
    BIDIRECTIONAL,
    CAUSAL,
    SequenceModel,
    attention_weights,
    forward_bidirectional,
    forward_causal,
    forward_full,
    init_model,
    load_model,
    predict_iterative,
    save_model,
)
from .train import AdamState, TrainReport, clip_global_norm, train

__all__ = [
    "ARCHITECTURES", "FEATURE_SETS", "NetConfig", "SequenceModel",
    "CAUSAL", "BIDIRECTIONAL",
    "available_backends", "backend_name", "get_kernels", "set_backend",
    "use_backend", "attention_weights", "forward_bidirectional",
    "forward_causal", "forward_full", "init_model", "load_model",
    "predict_iterative", "save_model", "AdamState", "TrainReport",
    "clip_global_norm", "train",
]
