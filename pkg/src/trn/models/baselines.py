"""Baselines: per-frame classifier, LSTM, encoder-decoder and the RNN-offline oracle."""

from __future__ import annotations

import numpy as np

from ..numerics import softmax
from .base import SequenceModel, SequenceOutput, ce_terms
from .config import TrnConfig
from .layers import (
    Params,
    affine_backward,
    affine_forward,
    init_affine,
    init_lstm,
    lstm_backward,
    lstm_forward,
    zeros_like_params,
)
from .trn import init_decoder, rollout_backward, rollout_forward


class Framewise(SequenceModel):
    """Stateless one-hidden-layer classifier applied to each frame."""

    kind = "framewise"

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        params: Params = {}
        init_affine(params, "hidden", config.feature_dim, config.hidden_dim, seed)
        init_affine(params, "classifier", config.hidden_dim, config.num_classes, seed)
        return params

    def forward(self, x):
        x = self._check_inputs(x)
        # one frame at a time, so BLAS blocking cannot make a prefix differ from the full run
        p = np.stack([framewise_probs(self.params, x[:, t]) for t in range(x.shape[1])], axis=1)
        B, T, _ = x.shape
        return SequenceOutput(p, np.empty((B, T, 0, self.config.num_classes)))

    def loss_and_grad(self, x, labels, future_labels=None, future_mask=None, alpha=None):
        x = self._check_inputs(x)
        labels, *_ = self._targets(labels, future_labels, future_mask, alpha)
        B, T, D = x.shape
        P = self.params
        xf = x.reshape(B * T, D)
        a = affine_forward(P, "hidden", xf)
        z = np.maximum(a, 0.0)
        p = softmax(affine_forward(P, "classifier", z))
        loss, dlogit = ce_terms(p, labels.reshape(-1), np.full(B * T, 1.0 / B))
        grads = zeros_like_params(P)
        dz = affine_backward(P, "classifier", z, dlogit, grads)
        affine_backward(P, "hidden", xf, dz * (a > 0), grads)
        return loss, grads


def framewise_probs(params: Params, x_t: np.ndarray) -> np.ndarray:
    z = np.maximum(affine_forward(params, "hidden", np.asarray(x_t, dtype=np.float64)), 0.0)
    return softmax(affine_forward(params, "classifier", z))


class LSTMBaseline(SequenceModel):
    """Single LSTM over the frame features with a softmax head."""

    kind = "lstm"

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        params: Params = {}
        init_lstm(params, "rnn", config.feature_dim, config.hidden_dim, seed)
        init_affine(params, "classifier", config.hidden_dim, config.num_classes, seed)
        return params

    def _encode(self, x):
        B, T, _ = x.shape
        H = self.config.hidden_dim
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs, caches = [], []
        for t in range(T):
            h, c, cache = lstm_forward(self.params, "rnn", x[:, t], h, c)
            hs.append(h)
            caches.append(cache)
        return hs, caches

    def forward(self, x):
        x = self._check_inputs(x)
        hs, _ = self._encode(x)
        p = np.stack([softmax(affine_forward(self.params, "classifier", h)) for h in hs], axis=1)
        B, T, _ = x.shape
        return SequenceOutput(p, np.empty((B, T, 0, self.config.num_classes)))

    def loss_and_grad(self, x, labels, future_labels=None, future_mask=None, alpha=None):
        x = self._check_inputs(x)
        labels, *_ = self._targets(labels, future_labels, future_mask, alpha)
        P = self.params
        B, T, _ = x.shape
        hs, caches = self._encode(x)
        hst = np.stack(hs, axis=1).reshape(B * T, -1)
        p = softmax(affine_forward(P, "classifier", hst))
        loss, dlogit = ce_terms(p, labels.reshape(-1), np.full(B * T, 1.0 / B))
        grads = zeros_like_params(P)
        dhs = affine_backward(P, "classifier", hst, dlogit, grads).reshape(B, T, -1)
        dh = np.zeros_like(hs[0])
        dc = np.zeros_like(hs[0])
        for t in reversed(range(T)):
            _, dh, dc = lstm_backward(P, "rnn", caches[t], dh + dhs[:, t], dc, grads)
        return loss, grads


class EncoderDecoder(SequenceModel):
    """LSTM encoder whose state seeds a TRN-shaped decoder at every step.

    The decoder's predictions are trained with the anticipation loss but
    never feed back into the current-frame classifier.
    """

    kind = "ed"

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        params = LSTMBaseline.init_params(config, seed)
        init_decoder(params, config, seed)
        return params

    @property
    def num_anticipated(self) -> int:
        return self.config.decoder_steps

    def forward(self, x):
        x = self._check_inputs(x)
        B, T, _ = x.shape
        P = self.params
        L, C, H = self.config.decoder_steps, self.config.num_classes, self.config.hidden_dim
        cur = np.empty((B, T, C))
        ant = np.empty((B, T, L, C))
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        for t in range(T):
            h, c, _ = lstm_forward(P, "rnn", x[:, t], h, c)
            cur[:, t] = softmax(affine_forward(P, "classifier", h))
            ro = rollout_forward(P, affine_forward(P, "hidden_embed", h), L)
            for i, q in enumerate(ro.probs):
                ant[:, t, i] = q
        return SequenceOutput(cur, ant)

    def loss_and_grad(self, x, labels, future_labels=None, future_mask=None, alpha=None):
        x = self._check_inputs(x)
        labels, fl, fm, alpha = self._targets(labels, future_labels, future_mask, alpha)
        P = self.params
        B, T, _ = x.shape
        L, H = self.config.decoder_steps, self.config.hidden_dim
        inv_b = 1.0 / B
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        loss = 0.0
        steps = []
        for t in range(T):
            h, c, cache = lstm_forward(P, "rnn", x[:, t], h, c)
            p = softmax(affine_forward(P, "classifier", h))
            lt, dcls = ce_terms(p, labels[:, t], np.full(B, inv_b))
            loss += lt
            ro = rollout_forward(P, affine_forward(P, "hidden_embed", h), L)
            dl_ant = []
            for i in range(L):
                li, di = ce_terms(ro.probs[i], fl[:, t, i], fm[:, t, i] * (alpha * inv_b))
                loss += li
                dl_ant.append(di)
            steps.append((h, cache, dcls, ro, dl_ant))

        grads = zeros_like_params(P)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for h_t, cache, dcls, ro, dl_ant in reversed(steps):
            dh0 = rollout_backward(P, ro, None, dl_ant, grads)
            dh = dh_next + affine_backward(P, "classifier", h_t, dcls, grads)
            dh = dh + affine_backward(P, "hidden_embed", h_t, dh0, grads)
            _, dh_next, dc_next = lstm_backward(P, "rnn", cache, dh, dc_next, grads)
        return loss, grads


def future_mean_features(frames: np.ndarray, horizon: int) -> np.ndarray:
    """concat(x_t, mean(x_{t+1..t+horizon})), truncated at the video end; zeros if nothing remains."""
    frames = np.asarray(frames, dtype=np.float64)
    T, D = frames.shape
    fut = np.zeros((T, D))
    if horizon > 0:
        for t in range(T - 1):
            fut[t] = frames[t + 1 : t + 1 + horizon].mean(axis=0)
    return np.concatenate([frames, fut], axis=1)


class RNNOffline(LSTMBaseline):
    """LSTM fed the current feature plus the average of the next ``decoder_steps`` features.

    Reads future frames, so it is an upper-bound oracle rather than an
    online model.
    """

    kind = "rnn-offline"

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        params: Params = {}
        init_lstm(params, "rnn", 2 * config.feature_dim, config.hidden_dim, seed)
        init_affine(params, "classifier", config.hidden_dim, config.num_classes, seed)
        return params

    @property
    def input_dim(self) -> int:
        return 2 * self.config.feature_dim

    def prepare(self, frames):
        return future_mean_features(frames, self.config.decoder_steps)
