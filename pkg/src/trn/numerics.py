"""Dense arithmetic, activations, cross-entropy, Adam and a finite-difference oracle.

Arrays are plain numpy arrays. Nothing here broadcasts implicitly: a shape
mismatch is always a :class:`ShapeError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

PROB_FLOOR = 1e-12


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def _shape(a) -> tuple:
    return tuple(np.shape(a))


def linear(W: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    W = np.asarray(W)
    x = np.asarray(x)
    b = np.asarray(b)
    if W.ndim != 2 or x.ndim != 1 or b.ndim != 1 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ShapeError(f"linear: W{_shape(W)} x{_shape(x)} b{_shape(b)}")
    return W @ x + b


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, stabilised by subtracting the max."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] == 0:
        raise ShapeError(f"softmax: empty input {_shape(z)}")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. logits given p = softmax(z) and dL/dp."""
    return p * (dp - (dp * p).sum(axis=-1, keepdims=True))


def cross_entropy(p: np.ndarray, label: int) -> float:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ShapeError(f"cross_entropy: expected a vector, got {p.shape}")
    if not 0 <= label < p.shape[0]:
        raise IndexError(f"label {label} out of range for {p.shape[0]} classes")
    return float(-np.log(max(p[label], PROB_FLOOR)))


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def tanh(x):
    return np.tanh(np.asarray(x, dtype=float))


def relu(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float = 0.0005,
    wd: float = 0.0005,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """One bias-corrected Adam update, in place on ``param`` and ``state``.

    Weight decay is an L2 term folded into the gradient before the moment
    updates.
    """
    if param.shape != grad.shape or param.shape != state.m.shape or param.shape != state.v.shape:
        raise ShapeError(f"adam_step: param{param.shape} grad{grad.shape} m{state.m.shape} v{state.v.shape}")
    g = grad + wd * param if wd else grad
    state.step += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * g
    state.v *= beta2
    state.v += (1.0 - beta2) * (g * g)
    if lr == 0:
        return param
    mhat = state.m / (1.0 - beta1**state.step)
    vhat = state.v / (1.0 - beta2**state.step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
    return param


@dataclass
class Adam:
    """Adam over a dict of named parameter arrays."""

    lr: float = 0.0005
    weight_decay: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict[str, AdamState] = field(default_factory=dict)

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        for name, p in params.items():
            st = self.states.get(name)
            if st is None:
                st = self.states[name] = AdamState.like(p)
            adam_step(p, grads[name], st, self.lr, self.weight_decay, self.beta1, self.beta2, self.eps)


def finite_diff_grad(
    f: Callable[[], float] | Callable[[np.ndarray], float],
    params,
    h: float = 1e-5,
):
    """Central-difference gradient of a scalar function.

    ``params`` is either a single array (then ``f`` takes it as argument) or a
    dict of arrays that ``f`` reads by closure; each array is perturbed in
    place and restored.
    """
    if isinstance(params, Mapping):
        return {name: _fd_array(f, arr, h, pass_arg=False) for name, arr in params.items()}
    arr = np.array(params, dtype=float)
    return _fd_array(f, arr, h, pass_arg=True)


def _fd_array(f, arr: np.ndarray, h: float, pass_arg: bool) -> np.ndarray:
    grad = np.zeros(arr.shape, dtype=float)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    call = (lambda: f(arr)) if pass_arg else f
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = float(call())
        flat[k] = orig - h
        fm = float(call())
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {k}")
        gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """max |a-b| over the block, divided by max(|a|+|b|) over the block (at least ``floor``).

    Normalising by the block's scale keeps round-off on near-zero entries
    from dominating the ratio.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"max_rel_error: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(a) + np.abs(b))), floor))
