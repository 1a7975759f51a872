"""The TRN cell: temporal decoder, future gate and spatiotemporal accumulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ShapeError, softmax, softmax_backward
from .base import SequenceModel, SequenceOutput, ce_terms
from .config import TrnConfig
from .layers import (
    CellState,
    Params,
    affine_backward,
    affine_forward,
    init_affine,
    init_lstm,
    lstm_backward,
    lstm_forward,
    zeros_like_params,
)


@dataclass
class Rollout:
    hidden: list[np.ndarray]
    probs: list[np.ndarray]
    inputs: list[np.ndarray]
    caches: list[tuple]


def init_decoder(params: Params, config: TrnConfig, seed: int) -> None:
    H, E, C = config.hidden_dim, config.score_embed_dim, config.num_classes
    init_affine(params, "hidden_embed", H, H, seed)
    init_affine(params, "score_embed", C, E, seed)
    init_lstm(params, "decoder", E, H, seed)
    init_affine(params, "decoder_classifier", H, C, seed)


def rollout_forward(params: Params, h_init: np.ndarray, steps: int) -> Rollout:
    """Run the decoder ``steps`` times from an already-embedded hidden state.

    The first input is the score embedding of an all-zero score vector; every
    later input embeds the previous step's predicted distribution.
    """
    B, H = h_init.shape
    h = h_init
    c = np.zeros_like(h_init)
    inp = np.broadcast_to(params["score_embed.b"], (B, params["score_embed.b"].shape[0]))
    ro = Rollout([], [], [], [])
    for i in range(steps):
        ro.inputs.append(inp)
        h, c, cache = lstm_forward(params, "decoder", inp, h, c)
        p = softmax(affine_forward(params, "decoder_classifier", h))
        ro.hidden.append(h)
        ro.probs.append(p)
        ro.caches.append(cache)
        if i + 1 < steps:
            inp = affine_forward(params, "score_embed", p)
    return ro


def rollout_backward(params: Params, ro: Rollout, dh_each, dlogits: list, grads: Params) -> np.ndarray:
    """Backprop through a rollout; returns the gradient w.r.t. its initial hidden state.

    ``dh_each`` is added to every decoder hidden state (the future-gate path),
    ``dlogits[i]`` is the direct loss gradient on step i's logits.
    """
    steps = len(ro.hidden)
    dh_next = 0.0
    dc_next = np.zeros_like(ro.hidden[0])
    dinp_next = None
    for i in reversed(range(steps)):
        dlogit = dlogits[i]
        if dinp_next is not None:
            dp = affine_backward(params, "score_embed", ro.probs[i], dinp_next, grads)
            dlogit = dlogit + softmax_backward(ro.probs[i], dp)
        dh = dh_next + affine_backward(params, "decoder_classifier", ro.hidden[i], dlogit, grads)
        if dh_each is not None:
            dh = dh + dh_each
        dinp_next, dh_next, dc_next = lstm_backward(params, "decoder", ro.caches[i], dh, dc_next, grads)
    grads["score_embed.b"] += dinp_next.sum(axis=0)
    return dh_next


def decoder_rollout(params: Params, h_prev: np.ndarray, steps: int):
    """Unbatched decoder rollout from the accumulator's previous hidden state.

    Returns (hidden states, predicted distributions), one per step.
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if h_prev.ndim != 1:
        raise ShapeError(f"h_prev must be a vector, got {h_prev.shape}")
    h0 = affine_forward(params, "hidden_embed", h_prev[None])
    ro = rollout_forward(params, h0, steps)
    return [h[0] for h in ro.hidden], [p[0] for p in ro.probs]


def future_gate(params: Params, hidden_stack) -> np.ndarray:
    """ReLU(W_f · mean(stack) + b_f). Works on (H,) vectors or (B, H) batches."""
    if len(hidden_stack) == 0:
        raise ValueError("future_gate needs at least one decoder hidden state")
    shapes = {np.shape(h) for h in hidden_stack}
    if len(shapes) != 1:
        raise ShapeError(f"future_gate: ragged hidden stack {sorted(shapes)}")
    mean = np.mean(np.stack(hidden_stack), axis=0)
    return np.maximum(affine_forward(params, "future_gate", mean), 0.0)


@dataclass
class StepOutput:
    p: np.ndarray
    anticipated: np.ndarray
    new_state: CellState
    cache: tuple


class TRN(SequenceModel):
    kind = "trn"

    @staticmethod
    def init_params(config: TrnConfig, seed: int) -> Params:
        D, H, F, C = config.feature_dim, config.hidden_dim, config.future_width, config.num_classes
        params: Params = {}
        init_lstm(params, "sta", D + F, H, seed)
        init_decoder(params, config, seed)
        init_affine(params, "future_gate", H, F, seed)
        init_affine(params, "classifier", H, C, seed)
        return params

    @property
    def num_anticipated(self) -> int:
        return self.config.decoder_steps

    def _step(self, x_t: np.ndarray, h: np.ndarray, c: np.ndarray):
        P = self.params
        L = self.config.decoder_steps
        h0 = affine_forward(P, "hidden_embed", h)
        ro = rollout_forward(P, h0, L)
        hbar = sum(ro.hidden) / L
        a = affine_forward(P, "future_gate", hbar)
        xf = np.maximum(a, 0.0)
        u = np.concatenate([x_t, xf], axis=-1)
        h_new, c_new, sta_cache = lstm_forward(P, "sta", u, h, c)
        p = softmax(affine_forward(P, "classifier", h_new))
        return p, h_new, c_new, (h, ro, hbar, a, sta_cache)

    def step(self, x_t: np.ndarray, state: CellState) -> StepOutput:
        """One TRN cell update on a single (unbatched) frame."""
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.shape != (self.config.feature_dim,):
            raise ShapeError(f"x_t must have shape ({self.config.feature_dim},), got {x_t.shape}")
        p, h, c, cache = self._step(x_t[None], state.h[None], state.c[None])
        ant = np.stack([q[0] for q in cache[1].probs])
        return StepOutput(p[0], ant, CellState(h[0], c[0]), cache)

    def forward(self, x: np.ndarray) -> SequenceOutput:
        x = self._check_inputs(x)
        B, T, _ = x.shape
        H, L = self.config.hidden_dim, self.config.decoder_steps
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        cur = np.empty((B, T, self.config.num_classes))
        ant = np.empty((B, T, L, self.config.num_classes))
        for t in range(T):
            p, h, c, cache = self._step(x[:, t], h, c)
            cur[:, t] = p
            for i, q in enumerate(cache[1].probs):
                ant[:, t, i] = q
        return SequenceOutput(cur, ant)

    def loss_and_grad(self, x, labels, future_labels=None, future_mask=None, alpha=None):
        x = self._check_inputs(x)
        labels, fl, fm, alpha = self._targets(labels, future_labels, future_mask, alpha)
        P = self.params
        B, T, D = x.shape
        H, L = self.config.hidden_dim, self.config.decoder_steps
        inv_b = 1.0 / B
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        loss = 0.0
        steps = []
        for t in range(T):
            p, h, c, cache = self._step(x[:, t], h, c)
            lt, dcls = ce_terms(p, labels[:, t], np.full(B, inv_b))
            loss += lt
            dl_ant = []
            for i in range(L):
                w = fm[:, t, i] * (alpha * inv_b)
                li, di = ce_terms(cache[1].probs[i], fl[:, t, i], w)
                loss += li
                dl_ant.append(di)
            steps.append((h, cache, dcls, dl_ant))

        grads = zeros_like_params(P)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for h_t, (h_prev, ro, hbar, a, sta_cache), dcls, dl_ant in reversed(steps):
            dh = dh_next + affine_backward(P, "classifier", h_t, dcls, grads)
            du, dh_prev, dc_next = lstm_backward(P, "sta", sta_cache, dh, dc_next, grads)
            da = du[:, D:] * (a > 0)
            dhbar = affine_backward(P, "future_gate", hbar, da, grads)
            dh0 = rollout_backward(P, ro, dhbar / L, dl_ant, grads)
            dh_prev = dh_prev + affine_backward(P, "hidden_embed", h_prev, dh0, grads)
            dh_next = dh_prev
        return loss, grads
