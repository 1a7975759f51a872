from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import PROB_FLOOR, ShapeError
from .config import TrnConfig
from .layers import Params


@dataclass
class SequenceOutput:
    """Batched per-frame outputs: current (B, T, C), anticipated (B, T, L, C)."""

    current: np.ndarray
    anticipated: np.ndarray


def ce_terms(p: np.ndarray, labels: np.ndarray, weight: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted sum of cross-entropies over a batch, and d/dlogits of that sum."""
    n, C = p.shape
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= C:
        raise IndexError(f"label out of range for {C} classes")
    rows = np.arange(n)
    picked = np.maximum(p[rows, labels], PROB_FLOOR)
    loss = float(np.sum(weight * -np.log(picked)))
    d = p * weight[:, None]
    d[rows, labels] -= weight
    return loss, d


class SequenceModel:
    """Common surface for TRN and the baselines.

    ``forward`` and ``loss_and_grad`` take inputs already passed through
    :meth:`prepare` and shaped (B, T, input_dim). The loss is Eq.-3 style:
    per-sample sum over time, averaged over the batch.
    """

    kind = ""

    def __init__(self, config: TrnConfig, params: Params | None = None, seed: int = 0):
        if config.model != self.kind:
            raise ValueError(f"{type(self).__name__} needs model={self.kind!r}, got {config.model!r}")
        self.config = config
        if params is None:
            params = self.init_params(config, seed)
        self.params = params

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        raise NotImplementedError

    @property
    def input_dim(self) -> int:
        return self.config.feature_dim

    @property
    def num_anticipated(self) -> int:
        return 0

    def prepare(self, frames: np.ndarray) -> np.ndarray:
        """Map one video's raw (T, D) features to model inputs."""
        return np.asarray(frames, dtype=np.float64)

    def _check_inputs(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.input_dim:
            raise ShapeError(f"{self.kind}: expected (B, T, {self.input_dim}) inputs, got {x.shape}")
        if x.shape[1] == 0:
            raise ValueError("empty sequence")
        return x

    def forward(self, x: np.ndarray) -> SequenceOutput:
        raise NotImplementedError

    def loss_and_grad(self, x, labels, future_labels=None, future_mask=None, alpha: float | None = None):
        raise NotImplementedError

    def loss(self, x, labels, future_labels=None, future_mask=None, alpha: float | None = None) -> float:
        return self.loss_and_grad(x, labels, future_labels, future_mask, alpha)[0]

    def stream(self, frames: np.ndarray) -> SequenceOutput:
        """Run one full video causally from zero state; returns unbatched arrays."""
        out = self.forward(self.prepare(frames)[None])
        return SequenceOutput(out.current[0], out.anticipated[0])

    def _targets(self, labels, future_labels, future_mask, alpha):
        labels = np.asarray(labels, dtype=np.int64)
        L = self.num_anticipated
        B, T = labels.shape
        if future_labels is None:
            future_labels = np.zeros((B, T, L), dtype=np.int64)
            future_mask = np.zeros((B, T, L), dtype=bool)
        future_labels = np.asarray(future_labels, dtype=np.int64)
        future_mask = np.asarray(future_mask, dtype=bool)
        if future_labels.shape != (B, T, L) or future_mask.shape != (B, T, L):
            raise ShapeError(f"future targets must be {(B, T, L)}, got {future_labels.shape} / {future_mask.shape}")
        if alpha is None:
            alpha = self.config.alpha
        return labels, future_labels, future_mask, float(alpha)
