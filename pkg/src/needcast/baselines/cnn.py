"""Convolutional top-K need classifier.

Embedding -> three convolution banks (widths 3/4/5, ReLU) -> max-pool over
time -> dropout -> dense -> softmax over need classes.  Trained with mean
binary cross-entropy against the multi-hot need indicator; prediction keeps
the K most probable needs, K being the largest training target size.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..base import Forecaster, TrainConfig, batches, usable_pairs
from ..encoding import NeedSequence
from ..neural import Optimizer, softmax, zeros_like

WIDTHS = (3, 4, 5)
N_FILTERS = 32
EMBED_DIM = 32
PROB_EPS = 1e-12


def top_k(probs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the *k* largest entries, descending; ties to the lower index."""
    return np.argsort(-probs, kind="stable")[:k]


def conv_maxpool(X: np.ndarray, W: np.ndarray, b: np.ndarray):
    """ReLU convolution over time with max-pooling.

    X is (batch, length, embed), W is (filters, width, embed).  Inputs shorter
    than the filter are zero-padded.  Returns pooled (batch, filters) and a
    cache for :func:`conv_maxpool_backward`.
    """
    width = W.shape[1]
    L = X.shape[1]
    if L < width:
        X = np.concatenate([X, np.zeros((X.shape[0], width - L, X.shape[2]))], axis=1)
    win = sliding_window_view(X, width, axis=1).transpose(0, 1, 3, 2)  # (B, n, w, E)
    pre = np.einsum("bnwe,fwe->bnf", win, W) + b
    act = np.maximum(pre, 0.0)
    arg = act.argmax(axis=1)  # (B, F)
    pooled = np.take_along_axis(act, arg[:, None, :], axis=1)[:, 0, :]
    return pooled, (win, pre, arg, L)


def conv_maxpool_backward(dpooled, W, cache):
    win, pre, arg, L = cache
    B, n, _ = pre.shape
    dpre = np.zeros_like(pre)
    np.put_along_axis(dpre, arg[:, None, :], dpooled[:, None, :], axis=1)
    dpre *= pre > 0
    dW = np.einsum("bnf,bnwe->fwe", dpre, win)
    db = dpre.sum(axis=(0, 1))
    dwin = np.einsum("bnf,fwe->bnwe", dpre, W)
    width = W.shape[1]
    dX = np.zeros((B, n + width - 1, W.shape[2]))
    for k in range(width):
        dX[:, k : k + n, :] += dwin[:, :, k, :]
    return dX[:, :L], dW, db


class ConvClassifier(Forecaster):
    model_type = "cnn"

    def __init__(
        self,
        vocab,
        dropout: float = 0.2,
        seed: int = 0,
        k: int = 1,
        embed_dim: int = EMBED_DIM,
        n_filters: int = N_FILTERS,
        init_scale: float = 0.08,
    ):
        super().__init__(vocab)
        self.dropout = dropout
        self.k = k
        self.embed_dim = embed_dim
        self.n_filters = n_filters
        self.classes = vocab.need_indices()
        rng = np.random.default_rng(seed)
        V, C = vocab.size, len(self.classes)
        p = {"embed": rng.uniform(-init_scale, init_scale, (V, embed_dim))}
        for w in WIDTHS:
            p[f"conv{w}.W"] = rng.uniform(-init_scale, init_scale, (n_filters, w, embed_dim))
            p[f"conv{w}.b"] = np.zeros(n_filters)
        p["out.W"] = rng.uniform(-init_scale, init_scale, (C, n_filters * len(WIDTHS)))
        p["out.b"] = np.zeros(C)
        self.params = p

    def features(self, src):
        X = self.params["embed"][src]
        pooled, caches = [], []
        for w in WIDTHS:
            f, cache = conv_maxpool(X, self.params[f"conv{w}.W"], self.params[f"conv{w}.b"])
            pooled.append(f)
            caches.append(cache)
        return np.concatenate(pooled, axis=1), caches

    def probabilities(self, src):
        feat, _ = self.features(src)
        return softmax(feat @ self.params["out.W"].T + self.params["out.b"])

    def indicator(self, targets):
        col = {int(c): j for j, c in enumerate(self.classes)}
        Y = np.zeros((len(targets), len(self.classes)))
        for r, t in enumerate(targets):
            for n in t.needs:
                j = col.get(self.vocab.index(n))
                if j is not None:
                    Y[r, j] = 1.0
        return Y

    def loss_and_grads(self, src, Y, drop=None):
        """Mean binary cross-entropy of the softmax outputs against *Y*."""
        p = self.params
        feat, caches = self.features(src)
        fd = feat if drop is None else feat * drop
        probs = softmax(fd @ p["out.W"].T + p["out.b"])
        q = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
        N = Y.size
        loss = float(-(Y * np.log(q) + (1.0 - Y) * np.log(1.0 - q)).sum() / N)
        dq = (-(Y / q) + (1.0 - Y) / (1.0 - q)) / N
        dz = probs * (dq - (probs * dq).sum(axis=1, keepdims=True))
        grads = zeros_like(p)
        grads["out.W"] = dz.T @ fd
        grads["out.b"] = dz.sum(axis=0)
        dfeat = dz @ p["out.W"]
        if drop is not None:
            dfeat = dfeat * drop
        dX = np.zeros(src.shape + (self.embed_dim,))
        F = self.n_filters
        for j, (w, cache) in enumerate(zip(WIDTHS, caches)):
            sl = slice(j * F, (j + 1) * F)
            dXw, grads[f"conv{w}.W"], grads[f"conv{w}.b"] = conv_maxpool_backward(dfeat[:, sl], p[f"conv{w}.W"], cache)
            dX += dXw
        np.add.at(grads["embed"], src, dX)
        return loss, grads

    def fit(self, pairs, cfg: TrainConfig):
        pairs = usable_pairs(pairs)
        self.k = max(len(p.target) for p in pairs)
        src = np.stack([self.vocab.encode(p.input.symbols) for p in pairs])
        Y = self.indicator([p.target for p in pairs])
        rng = np.random.default_rng(cfg.seed + 1)
        opt = Optimizer(cfg.optimizer, cfg.lr, clip=cfg.clip)
        keep = 1.0 - self.dropout
        updates = 0
        for _ in range(cfg.epochs):
            losses = []
            for idx in batches(len(pairs), cfg.batch_size, rng):
                drop = None
                if self.dropout:
                    drop = (rng.random((len(idx), self.n_filters * len(WIDTHS))) < keep) / keep
                loss, grads = self.loss_and_grads(src[idx], Y[idx], drop)
                self.record_loss(loss)
                opt.step(self.params, grads)
                losses.append(loss)
                updates += 1
                if cfg.max_updates and updates >= cfg.max_updates:
                    break
            self.loss_curve.epochs.append(float(np.mean(losses)))
            if cfg.max_updates and updates >= cfg.max_updates:
                break
        self.meta.update(cfg.to_dict(), updates=updates, final_loss=self.loss_curve.updates[-1])
        return self

    def predict_many(self, inputs):
        inputs = list(inputs)
        if not inputs:
            return []
        src = np.stack([self.vocab.encode(i.symbols) for i in inputs])
        probs = self.probabilities(src)
        k = min(self.k, len(self.classes))
        return [
            NeedSequence(tuple(self.vocab.symbol(int(self.classes[j])) for j in top_k(row, k)))
            for row in probs
        ]

    def tensors(self):
        return dict(self.params)

    def state_meta(self):
        return {"dropout": self.dropout, "k": self.k, "embed_dim": self.embed_dim, "n_filters": self.n_filters}

    @classmethod
    def from_state(cls, vocab, tensors, meta):
        model = cls(
            vocab,
            float(meta["dropout"]),
            k=int(meta["k"]),
            embed_dim=int(meta["embed_dim"]),
            n_filters=int(meta["n_filters"]),
            init_scale=0.0,
        )
        for name in model.params:
            model.params[name] = np.array(tensors[name], dtype=np.float64)
        model.meta = dict(meta)
        return model
