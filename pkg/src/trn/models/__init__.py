from __future__ import annotations

import numpy as np

from ..numerics import ShapeError
from .base import SequenceModel, SequenceOutput
from .baselines import EncoderDecoder, Framewise, LSTMBaseline, RNNOffline, framewise_probs, future_mean_features
from .config import MODEL_KINDS, ConfigError, TrnConfig
from .layers import CellState, Params, lstm_forward
from .trn import TRN, StepOutput, decoder_rollout, future_gate

MODELS: dict[str, type[SequenceModel]] = {
    cls.kind: cls for cls in (TRN, LSTMBaseline, EncoderDecoder, Framewise, RNNOffline)
}


def build_model(config: TrnConfig, seed: int = 0, params: Params | None = None) -> SequenceModel:
    return MODELS[config.model](config, params=params, seed=seed)


def lstm_step(params: Params, name: str, x: np.ndarray, state: CellState) -> CellState:
    """Unbatched LSTM update of the cell called ``name``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"x must be a vector, got {x.shape}")
    h, c, _ = lstm_forward(params, name, x[None], state.h[None], state.c[None])
    return CellState(h[0], c[0])


def forward_sequence(model: SequenceModel, frames: np.ndarray) -> SequenceOutput:
    """Stream one video (T, D) through ``model`` from zero state."""
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError(f"expected a non-empty (T, D) sequence, got shape {frames.shape}")
    return model.stream(frames)


def backward_sequence(model: SequenceModel, frames, labels, future_labels=None, future_mask=None, alpha=None):
    """Loss and parameter gradients for a single sequence."""
    x = model.prepare(frames)[None]
    fl = None if future_labels is None else np.asarray(future_labels)[None]
    fm = None if future_mask is None else np.asarray(future_mask)[None]
    return model.loss_and_grad(x, np.asarray(labels)[None], fl, fm, alpha)


__all__ = [
    "MODELS",
    "MODEL_KINDS",
    "TRN",
    "CellState",
    "ConfigError",
    "EncoderDecoder",
    "Framewise",
    "LSTMBaseline",
    "RNNOffline",
    "SequenceModel",
    "SequenceOutput",
    "StepOutput",
    "TrnConfig",
    "backward_sequence",
    "build_model",
    "decoder_rollout",
    "forward_sequence",
    "framewise_probs",
    "future_gate",
    "future_mean_features",
    "lstm_step",
]
