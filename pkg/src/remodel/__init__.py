"""Neural relation extraction model over frozen word embeddings."""

from .checkpoint import load_model, save_model
from .layers import BiLSTMLayer, CNNLayer, ContextLayer, PassThroughLayer, get_context_layer
from .model import (
    CONTEXT_KINDS,
    REModelConfig,
    REModelParams,
    TrainingHistory,
    bilstm_forward,
    cnn_forward,
    init_params,
    loss_and_gradients,
    output_layer,
    predict,
    predict_vectors,
    summarize,
)
from .training import AdamOptimizer, train

__all__ = [
    "AdamOptimizer",
    "BiLSTMLayer",
    "CNNLayer",
    "CONTEXT_KINDS",
    "ContextLayer",
    "PassThroughLayer",
    "REModelConfig",
    "REModelParams",
    "TrainingHistory",
    "bilstm_forward",
    "cnn_forward",
    "get_context_layer",
    "init_params",
    "load_model",
    "loss_and_gradients",
    "output_layer",
    "predict",
    "predict_vectors",
    "save_model",
    "summarize",
    "train",
]
