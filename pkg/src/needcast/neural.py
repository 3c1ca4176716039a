"""Numerical kernel: peephole LSTM cell, softmax, cross-entropy, optimisers.

Arrays are float64 row vectors.  Every cell function accepts a single vector
of shape ``(dim,)`` or a batch of shape ``(batch, dim)``.

The cell computes::

    i = sigmoid(W_xi x + W_hi h_prev + w_ci * c_prev + b_i)
    f = sigmoid(W_xf x + W_hf h_prev + w_cf * c_prev + b_f)
    g = tanh(W_xc x + W_hc h_prev + b_c)
    c = f * c_prev + i * g
    o = sigmoid(W_xo x + W_ho h_prev + w_co * c + b_o)     # peephole on the new cell
    h = o * tanh(c)

with the peephole weights ``w_c*`` stored as diagonal vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, MutableMapping

import numpy as np

from .errors import NumericError, ShapeError, StateError

LSTM_TENSORS = (
    "W_xi", "W_hi", "W_ci", "b_i",
    "W_xf", "W_hf", "W_cf", "b_f",
    "W_xc", "W_hc", "b_c",
    "W_xo", "W_ho", "W_co", "b_o",
)  # fmt: skip
INIT_SCALE = 0.08


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator, scale: float = INIT_SCALE) -> dict:
    """Uniform(-scale, scale) weights; zero peepholes and biases."""
    if input_dim <= 0 or hidden_dim <= 0:
        raise ShapeError("LSTM dimensions must be positive")
    p = {}
    for gate in "ifco":
        p[f"W_x{gate}"] = rng.uniform(-scale, scale, (hidden_dim, input_dim))
        p[f"W_h{gate}"] = rng.uniform(-scale, scale, (hidden_dim, hidden_dim))
        if gate != "c":
            p[f"W_c{gate}"] = np.zeros(hidden_dim)
        p[f"b_{gate}"] = np.zeros(hidden_dim)
    return {k: p[k] for k in LSTM_TENSORS}


def lstm_dims(params: Mapping[str, np.ndarray]) -> tuple[int, int]:
    hidden, inp = params["W_xi"].shape
    return inp, hidden


def subparams(params: Mapping[str, np.ndarray], prefix: str) -> dict:
    """View of the entries under ``prefix`` with the prefix stripped."""
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


@dataclass
class LSTMState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> LSTMState:
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class LSTMCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def lstm_forward(params: Mapping[str, np.ndarray], x: np.ndarray, prev: LSTMState) -> tuple[LSTMState, LSTMCache]:
    """One step of the peephole cell; returns the new state and a backward cache."""
    inp, hidden = lstm_dims(params)
    if x.shape[-1] != inp:
        raise ShapeError(f"input has dim {x.shape[-1]}, cell expects {inp}")
    if prev.h.shape[-1] != hidden or prev.c.shape != prev.h.shape:
        raise ShapeError(f"state shape {prev.h.shape}/{prev.c.shape} does not match hidden={hidden}")
    p = params
    h0, c0 = prev.h, prev.c
    i = sigmoid(x @ p["W_xi"].T + h0 @ p["W_hi"].T + p["W_ci"] * c0 + p["b_i"])
    f = sigmoid(x @ p["W_xf"].T + h0 @ p["W_hf"].T + p["W_cf"] * c0 + p["b_f"])
    g = np.tanh(x @ p["W_xc"].T + h0 @ p["W_hc"].T + p["b_c"])
    c = f * c0 + i * g
    o = sigmoid(x @ p["W_xo"].T + h0 @ p["W_ho"].T + p["W_co"] * c + p["b_o"])
    tc = np.tanh(c)
    h = o * tc
    return LSTMState(h, c), LSTMCache(x, h0, c0, i, f, g, o, c, tc)


def _outer_acc(grad: np.ndarray, delta: np.ndarray, x: np.ndarray) -> None:
    if delta.ndim == 1:
        grad += np.outer(delta, x)
    else:
        grad += delta.T @ x


def _vec_acc(grad: np.ndarray, v: np.ndarray) -> None:
    grad += v if v.ndim == 1 else v.sum(axis=0)


def lstm_step_backward(
    params: Mapping[str, np.ndarray],
    cache: LSTMCache,
    dh: np.ndarray,
    dc: np.ndarray,
    grads: MutableMapping[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagate one step; accumulates into *grads*.

    *dh* and *dc* are the loss gradients reaching this step's outputs ``h``
    and ``c`` (the latter only from later steps).  Returns ``(dx, dh_prev,
    dc_prev)``.
    """
    p = params
    k = cache
    do = dh * k.tanh_c
    da_o = do * k.o * (1.0 - k.o)
    dc = dc + dh * k.o * (1.0 - k.tanh_c**2) + da_o * p["W_co"]
    di = dc * k.g
    df = dc * k.c_prev
    dg = dc * k.i
    da_i = di * k.i * (1.0 - k.i)
    da_f = df * k.f * (1.0 - k.f)
    da_g = dg * (1.0 - k.g**2)

    for gate, da in (("i", da_i), ("f", da_f), ("c", da_g), ("o", da_o)):
        _outer_acc(grads[f"W_x{gate}"], da, k.x)
        _outer_acc(grads[f"W_h{gate}"], da, k.h_prev)
        _vec_acc(grads[f"b_{gate}"], da)
    _vec_acc(grads["W_ci"], da_i * k.c_prev)
    _vec_acc(grads["W_cf"], da_f * k.c_prev)
    _vec_acc(grads["W_co"], da_o * k.c)

    dx = da_i @ p["W_xi"] + da_f @ p["W_xf"] + da_g @ p["W_xc"] + da_o @ p["W_xo"]
    dh_prev = da_i @ p["W_hi"] + da_f @ p["W_hf"] + da_g @ p["W_hc"] + da_o @ p["W_ho"]
    dc_prev = dc * k.f + da_i * p["W_ci"] + da_f * p["W_cf"]
    return dx, dh_prev, dc_prev


def lstm_sequence(params, xs, state: LSTMState) -> tuple[list[np.ndarray], list[LSTMCache], LSTMState]:
    hs, caches = [], []
    for x in xs:
        state, cache = lstm_forward(params, x, state)
        hs.append(state.h)
        caches.append(cache)
    return hs, caches, state


def zeros_like(params: Mapping[str, np.ndarray]) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


def lstm_backward(params, caches, dhs, dh_final=None, dc_final=None, grads=None):
    """Backpropagation through time over a cached sequence.

    *dhs* holds the loss gradient w.r.t. each step's hidden output (``None``
    entries mean zero).  *dh_final*/*dc_final* add gradient arriving at the
    final state.  Returns ``(grads, dxs, dh0, dc0)`` where ``dh0, dc0`` are the
    gradients w.r.t. the initial state.
    """
    if len(dhs) != len(caches):
        raise StateError(f"{len(dhs)} upstream gradients for a cached sequence of length {len(caches)}")
    if grads is None:
        grads = zeros_like(params)
    if not caches:
        return grads, [], dh_final, dc_final
    shape = caches[-1].c.shape
    dh_next = np.zeros(shape) if dh_final is None else dh_final.copy()
    dc_next = np.zeros(shape) if dc_final is None else dc_final.copy()
    dxs = [None] * len(caches)
    for t in range(len(caches) - 1, -1, -1):
        dh = dh_next if dhs[t] is None else dh_next + dhs[t]
        dxs[t], dh_next, dc_next = lstm_step_backward(params, caches[t], dh, dc_next, grads)
    return grads, dxs, dh_next, dc_next


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax; ``-inf`` entries get probability 0."""
    z = scores - np.max(scores, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def cross_entropy(probs: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of *target* and its gradient w.r.t. the
    pre-softmax scores (``probs - one_hot(target)``)."""
    if not 0 <= target < probs.shape[-1]:
        raise IndexError(f"target {target} out of range for {probs.shape[-1]} classes")
    grad = probs.copy()
    grad[..., target] -= 1.0
    with np.errstate(divide="ignore"):
        loss = -np.log(probs[..., target])
    return float(loss), grad


def batch_cross_entropy(scores: np.ndarray, targets: np.ndarray, weights: np.ndarray):
    """Weighted sum of per-row cross-entropies and the score gradient."""
    probs = softmax(scores)
    rows = np.arange(len(targets))
    picked = probs[rows, targets]
    loss = float(-(weights * np.log(picked)).sum())
    grad = probs
    grad[rows, targets] -= 1.0
    grad *= weights[:, None]
    return loss, grad


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


class Optimizer:
    """Plain SGD or Adam with global-norm clipping, updating parameters in place."""

    def __init__(self, method="adam", lr=None, beta1=0.9, beta2=0.999, eps=1e-8, clip=5.0):
        if method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimiser {method!r}")
        self.method = method
        self.lr = (1e-3 if method == "adam" else 0.1) if lr is None else lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.clip = clip
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: MutableMapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> float:
        """Apply one update and return the pre-clipping gradient norm."""
        for name, g in grads.items():
            if name not in params or params[name].shape != g.shape:
                raise ShapeError(f"gradient {name} does not match any parameter")
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in {name}; update rejected")
        norm = global_norm(grads)
        scale = self.clip / norm if self.clip and norm > self.clip else 1.0
        self.t += 1
        if self.method == "sgd":
            for name, g in grads.items():
                params[name] -= self.lr * scale * g
            return norm
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for name, g in grads.items():
            g = g * scale
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[name] -= lr_t * m / (np.sqrt(v) + self.eps)
        return norm


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps vanishing gradients
    from turning round-off into large relative errors."""
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def numeric_gradient(loss_fn: Callable[[], float], param: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    out = grad.reshape(-1)
    for j in range(flat.size):
        old = flat[j]
        flat[j] = old + eps
        up = loss_fn()
        flat[j] = old - eps
        down = loss_fn()
        flat[j] = old
        out[j] = (up - down) / (2.0 * eps)
    return grad


def gradient_check(loss_fn, params, analytic, eps=1e-5, names=None) -> dict:
    """Max relative error per tensor between *analytic* and central differences.

    *loss_fn* is called with no arguments and must read the (mutated) *params*.
    """
    report = {}
    for name in names or list(params):
        num = numeric_gradient(loss_fn, params[name], eps)
        report[name] = float(np.max(relative_error(analytic[name], num))) if num.size else 0.0
    return report
