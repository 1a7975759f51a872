"""Batched LSTM cell and affine layers with hand-written backward passes.

Inputs carry a leading batch axis; the gate order inside the stacked
weights is (input, forget, output, candidate).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..numerics import ShapeError, sigmoid
from ..rng import stream

Params = dict[str, np.ndarray]


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None, dtype=np.float64) -> "CellState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype))


def _block_rng(seed: int, name: str) -> np.random.Generator:
    return stream(seed, "init", zlib.crc32(name.encode("utf-8")))


def init_affine(params: Params, name: str, n_in: int, n_out: int, seed: int, dtype=np.float64) -> None:
    rng = _block_rng(seed, name)
    bound = 1.0 / np.sqrt(n_in)
    params[f"{name}.W"] = rng.uniform(-bound, bound, (n_out, n_in)).astype(dtype)
    params[f"{name}.b"] = rng.uniform(-bound, bound, n_out).astype(dtype)


def init_lstm(params: Params, name: str, n_in: int, hidden: int, seed: int, dtype=np.float64) -> None:
    rng = _block_rng(seed, name)
    bound = 1.0 / np.sqrt(n_in + hidden)
    params[f"{name}.Wx"] = rng.uniform(-bound, bound, (4 * hidden, n_in)).astype(dtype)
    params[f"{name}.Wh"] = rng.uniform(-bound, bound, (4 * hidden, hidden)).astype(dtype)
    b = rng.uniform(-bound, bound, 4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    params[f"{name}.b"] = b.astype(dtype)


def lstm_forward(params: Params, name: str, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    """One LSTM step. Returns (h_new, c_new, cache)."""
    Wx = params[f"{name}.Wx"]
    if x.shape[-1] != Wx.shape[1] or h.shape[-1] != Wx.shape[0] // 4:
        raise ShapeError(f"{name}: input {x.shape} / hidden {h.shape} vs Wx{Wx.shape}")
    H = h.shape[-1]
    z = x @ Wx.T + h @ params[f"{name}.Wh"].T + params[f"{name}.b"]
    ifo = sigmoid(z[..., : 3 * H])
    g = np.tanh(z[..., 3 * H :])
    i, f, o = ifo[..., :H], ifo[..., H : 2 * H], ifo[..., 2 * H :]
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, ifo, g, tc)


def lstm_backward(params: Params, name: str, cache, dh: np.ndarray, dc: np.ndarray, grads: Params):
    """Backprop one step. Accumulates weight grads, returns (dx, dh_prev, dc_prev)."""
    x, h, c, ifo, g, tc = cache
    H = h.shape[-1]
    i, f, o = ifo[..., :H], ifo[..., H : 2 * H], ifo[..., 2 * H :]
    dct = dc + dh * o * (1.0 - tc * tc)
    dz = np.empty(ifo.shape[:-1] + (4 * H,))
    dz[..., :H] = dct * g
    dz[..., H : 2 * H] = dct * c
    dz[..., 2 * H : 3 * H] = dh * tc
    dz[..., : 3 * H] *= ifo * (1.0 - ifo)
    dz[..., 3 * H :] = dct * i * (1.0 - g * g)
    Wx = params[f"{name}.Wx"]
    Wh = params[f"{name}.Wh"]
    grads[f"{name}.Wx"] += dz.T @ x
    grads[f"{name}.Wh"] += dz.T @ h
    grads[f"{name}.b"] += dz.sum(axis=0)
    return dz @ Wx, dz @ Wh, dct * f


def affine_forward(params: Params, name: str, x: np.ndarray) -> np.ndarray:
    W = params[f"{name}.W"]
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"{name}: input {x.shape} vs W{W.shape}")
    return x @ W.T + params[f"{name}.b"]


def affine_backward(params: Params, name: str, x: np.ndarray, dy: np.ndarray, grads: Params) -> np.ndarray:
    grads[f"{name}.W"] += dy.T @ x
    grads[f"{name}.b"] += dy.sum(axis=0)
    return dy @ params[f"{name}.W"]


def zeros_like_params(params: Params) -> Params:
    return {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
