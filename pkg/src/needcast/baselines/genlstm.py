"""Generative LSTM baseline: next-token LSTM over joined weather+need streams.

A single peephole LSTM reads one-hot tokens; its hidden vector passes through
dropout (training only) and a dense layer scoring the next token.  At
inference the eight input symbols prime the state and needs are generated
greedily until EOS.
"""

from __future__ import annotations

import numpy as np

from ..base import Forecaster, TrainConfig, batches, usable_pairs
from ..encoding import EOS, MAX_NEEDS, NeedSequence
from ..neural import (
    INIT_SCALE,
    LSTMState,
    Optimizer,
    batch_cross_entropy,
    init_lstm,
    lstm_backward,
    lstm_sequence,
    subparams,
    zeros_like,
)


def _onehot_rows(idx, size):
    out = np.zeros((len(idx), size))
    out[np.arange(len(idx)), idx] = 1.0
    return out


class GenerativeLSTM(Forecaster):
    model_type = "genlstm"

    def __init__(self, vocab, hidden: int = 256, dropout: float = 0.2, seed: int = 0, init_scale: float = INIT_SCALE):
        super().__init__(vocab)
        if not 0 <= dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        self.hidden = hidden
        self.dropout = dropout
        V = vocab.size
        rng = np.random.default_rng(seed)
        self.params = {f"lstm.{k}": v for k, v in init_lstm(V, hidden, rng, init_scale).items()}
        self.params["out.W"] = rng.uniform(-init_scale, init_scale, (V, hidden))
        self.params["out.b"] = np.zeros(V)

    def token_sequences(self, pairs):
        return [
            [*self.vocab.encode(p.input.symbols), *(self.vocab.index(n) for n in p.target.needs), EOS]
            for p in pairs
        ]

    def batch_arrays(self, seqs):
        """Padded ``(inputs, targets, mask)`` for next-token prediction."""
        T = max(len(s) for s in seqs) - 1
        x = np.full((len(seqs), T), EOS, dtype=np.int64)
        y = np.full((len(seqs), T), EOS, dtype=np.int64)
        m = np.zeros((len(seqs), T))
        for r, s in enumerate(seqs):
            n = len(s) - 1
            x[r, :n] = s[:-1]
            y[r, :n] = s[1:]
            m[r, :n] = 1.0
        return x, y, m

    def dropout_masks(self, shape, rng):
        if self.dropout == 0:
            return None
        keep = 1.0 - self.dropout
        return (rng.random(shape) < keep) / keep

    def loss_and_grads(self, x, y, mask, drop=None):
        """Mean next-token cross-entropy; *drop* is an optional (B, T, H)
        inverted-dropout multiplier applied to hidden states before the dense layer."""
        p = self.params
        lstm = subparams(p, "lstm.")
        B, T = x.shape
        V = self.vocab.size
        xs = [_onehot_rows(x[:, t], V) for t in range(T)]
        hs, caches, _ = lstm_sequence(lstm, xs, LSTMState.zeros(self.hidden, B))
        weights = mask / mask.sum()
        grads = zeros_like(p)
        total = 0.0
        dhs = []
        for t in range(T):
            hd = hs[t] if drop is None else hs[t] * drop[:, t]
            scores = hd @ p["out.W"].T + p["out.b"]
            loss_t, ds = batch_cross_entropy(scores, y[:, t], weights[:, t])
            total += loss_t
            grads["out.W"] += ds.T @ hd
            grads["out.b"] += ds.sum(axis=0)
            dh = ds @ p["out.W"]
            dhs.append(dh if drop is None else dh * drop[:, t])
        lstm_backward(lstm, caches, dhs, grads=subparams(grads, "lstm."))
        return total, grads

    def fit(self, pairs, cfg: TrainConfig):
        pairs = usable_pairs(pairs)
        seqs = self.token_sequences(pairs)
        rng = np.random.default_rng(cfg.seed + 1)
        opt = Optimizer(cfg.optimizer, cfg.lr, clip=cfg.clip)
        updates = 0
        for _ in range(cfg.epochs):
            losses = []
            for idx in batches(len(seqs), cfg.batch_size, rng):
                x, y, m = self.batch_arrays([seqs[i] for i in idx])
                drop = self.dropout_masks((*x.shape, self.hidden), rng)
                loss, grads = self.loss_and_grads(x, y, m, drop)
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
        p = self.params
        lstm = subparams(p, "lstm.")
        V = self.vocab.size
        src = np.stack([self.vocab.encode(i.symbols) for i in inputs])
        B = len(inputs)
        xs = [_onehot_rows(src[:, t], V) for t in range(src.shape[1] - 1)]
        _, _, state = lstm_sequence(lstm, xs, LSTMState.zeros(self.hidden, B))
        prev = src[:, -1]
        allowed = self.vocab.need_mask()
        allowed[EOS] = True
        allowed = np.broadcast_to(allowed, (B, V)).copy()
        done = np.zeros(B, dtype=bool)
        emitted = [[] for _ in range(B)]
        for _ in range(MAX_NEEDS):
            hs, _, state = lstm_sequence(lstm, [_onehot_rows(prev, V)], state)
            scores = np.where(allowed, hs[0] @ p["out.W"].T + p["out.b"], -np.inf)
            choice = scores.argmax(axis=1)
            for b in np.flatnonzero(~done):
                if choice[b] == EOS:
                    done[b] = True
                else:
                    emitted[b].append(int(choice[b]))
                    allowed[b, choice[b]] = False
            prev = choice
            if done.all():
                break
        return [
            NeedSequence(tuple(self.vocab.decode(e)), bool(d)) for e, d in zip(emitted, done)
        ]

    def tensors(self):
        return dict(self.params)

    def state_meta(self):
        return {"hidden": self.hidden, "dropout": self.dropout}

    @classmethod
    def from_state(cls, vocab, tensors, meta):
        model = cls(vocab, int(meta["hidden"]), float(meta["dropout"]), init_scale=0.0)
        for k in model.params:
            model.params[k] = np.array(tensors[k], dtype=np.float64)
        model.meta = dict(meta)
        return model
