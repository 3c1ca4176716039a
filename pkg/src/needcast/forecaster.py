"""Attention encoder-decoder over peephole LSTMs for hourly need forecasting.

The encoder reads the eight one-hot input symbols.  Its final ``(h, c)`` seeds
the decoder.  At each decode step the previous output symbol and the decoder
hidden state are concatenated and projected to eight attention scores; their
softmax weights the encoder outputs into a context vector, which is combined
with the previous symbol to form the decoder LSTM input.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .base import Forecaster, TrainConfig, batches, target_arrays, usable_pairs
from .encoding import EOS, INPUT_LEN, MAX_NEEDS, SOS, InputSequence, NeedSequence, SymbolVocabulary
from .neural import (
    INIT_SCALE,
    LSTMState,
    Optimizer,
    batch_cross_entropy,
    init_lstm,
    lstm_forward,
    lstm_sequence,
    lstm_backward,
    lstm_step_backward,
    softmax,
    subparams,
    zeros_like,
)


@dataclass
class AttentionTrace:
    """Attention weights: one row per decoded token, one column per input symbol."""

    weights: np.ndarray
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["output", *self.inputs])
        for sym, row in zip(self.outputs, self.weights):
            w.writerow([sym, *(f"{a:.6f}" for a in row)])
        return buf.getvalue()


def _onehot_rows(idx: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((len(idx), size))
    out[np.arange(len(idx)), idx] = 1.0
    return out


class Seq2SeqForecaster(Forecaster):
    model_type = "seq2seq"

    def __init__(self, vocab: SymbolVocabulary, hidden: int = 256, seed: int = 0, init_scale: float = INIT_SCALE):
        super().__init__(vocab)
        self.hidden = hidden
        V, H = vocab.size, hidden
        rng = np.random.default_rng(seed)
        p = {}
        for k, v in init_lstm(V, H, rng, init_scale).items():
            p[f"encoder.{k}"] = v
        for k, v in init_lstm(H, H, rng, init_scale).items():
            p[f"decoder.{k}"] = v
        p["attn.W"] = rng.uniform(-init_scale, init_scale, (INPUT_LEN, V + H))
        p["attn.b"] = np.zeros(INPUT_LEN)
        p["combine.W"] = rng.uniform(-init_scale, init_scale, (H, V + H))
        p["combine.b"] = np.zeros(H)
        p["out.W"] = rng.uniform(-init_scale, init_scale, (V, H))
        p["out.b"] = np.zeros(V)
        self.params = p

    # -- forward pieces -------------------------------------------------

    @property
    def encoder(self):
        return subparams(self.params, "encoder.")

    @property
    def decoder(self):
        return subparams(self.params, "decoder.")

    def _indices(self, inputs) -> np.ndarray:
        rows = []
        for inp in inputs:
            if isinstance(inp, InputSequence):
                rows.append(self.vocab.encode(inp.symbols))
            else:
                rows.append(np.asarray(inp, dtype=np.int64))
        return np.stack(rows)

    def _encode(self, src: np.ndarray):
        V = self.vocab.size
        xs = [_onehot_rows(src[:, t], V) for t in range(src.shape[1])]
        B = src.shape[0]
        hs, caches, final = lstm_sequence(self.encoder, xs, LSTMState.zeros(self.hidden, B))
        return np.stack(hs, axis=1), caches, final

    def encode(self, inp):
        """Encoder outputs (8 x hidden) and the final state handed to the decoder."""
        O, _, final = self._encode(self._indices([inp]))
        return O[0], LSTMState(final.h[0], final.c[0])

    def _step(self, dec, prev_idx, state: LSTMState, O):
        p = self.params
        V = self.vocab.size
        xp = _onehot_rows(prev_idx, V)
        z = np.concatenate([xp, state.h], axis=1)
        alpha = softmax(z @ p["attn.W"].T + p["attn.b"])
        ctx = np.einsum("bk,bkh->bh", alpha, O)
        zc = np.concatenate([xp, ctx], axis=1)
        u = zc @ p["combine.W"].T + p["combine.b"]
        new, cache = lstm_forward(dec, u, state)
        scores = new.h @ p["out.W"].T + p["out.b"]
        return scores, new, alpha, (z, zc, cache)

    def decode_step(self, prev_index: int, state: LSTMState, encoder_outputs: np.ndarray):
        """One decoder step for a single sequence: ``(scores, new_state, alpha)``."""
        st = LSTMState(state.h[None, :], state.c[None, :])
        scores, new, alpha, _ = self._step(
            self.decoder, np.array([prev_index]), st, encoder_outputs[None, :, :]
        )
        return scores[0], LSTMState(new.h[0], new.c[0]), alpha[0]

    # -- training ---------------------------------------------------------

    def loss_and_grads(self, src, tgt_in, tgt_out, mask, teacher_forcing=True, normalize=True):
        """Masked cross-entropy over a padded batch and its gradient.

        With ``normalize`` the loss is the mean over real target tokens,
        otherwise their sum.  Returns ``(loss, grads)``.
        """
        p = self.params
        V = self.vocab.size
        dec = self.decoder
        O, enc_caches, state = self._encode(src)
        B, T = tgt_out.shape
        weights = mask / mask.sum() if normalize else mask
        total = 0.0
        steps = []
        prev = tgt_in[:, 0]
        for t in range(T):
            scores, state, alpha, (z, zc, cache) = self._step(dec, prev, state, O)
            loss_t, ds = batch_cross_entropy(scores, tgt_out[:, t], weights[:, t])
            total += loss_t
            steps.append((alpha, z, zc, cache, state.h, ds))
            if t + 1 < T:
                prev = tgt_in[:, t + 1] if teacher_forcing else scores.argmax(axis=1)

        grads = zeros_like(p)
        gdec = subparams(grads, "decoder.")
        dO = np.zeros_like(O)
        dh_next = np.zeros((B, self.hidden))
        dc_next = np.zeros((B, self.hidden))
        for alpha, z, zc, cache, h, ds in reversed(steps):
            grads["out.W"] += ds.T @ h
            grads["out.b"] += ds.sum(axis=0)
            dh = ds @ p["out.W"] + dh_next
            du, dh_prev, dc_prev = lstm_step_backward(dec, cache, dh, dc_next, gdec)
            grads["combine.W"] += du.T @ zc
            grads["combine.b"] += du.sum(axis=0)
            dctx = (du @ p["combine.W"])[:, V:]
            dalpha = np.einsum("bh,bkh->bk", dctx, O)
            dO += alpha[:, :, None] * dctx[:, None, :]
            de = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
            grads["attn.W"] += de.T @ z
            grads["attn.b"] += de.sum(axis=0)
            dh_next = dh_prev + (de @ p["attn.W"])[:, V:]
            dc_next = dc_prev
        genc = subparams(grads, "encoder.")
        lstm_backward(
            self.encoder,
            enc_caches,
            [dO[:, k] for k in range(O.shape[1])],
            dh_final=dh_next,
            dc_final=dc_next,
            grads=genc,
        )
        return total, grads

    def fit(self, pairs, cfg: TrainConfig):
        pairs = usable_pairs(pairs)
        rng = np.random.default_rng(cfg.seed + 1)
        opt = Optimizer(cfg.optimizer, cfg.lr, clip=cfg.clip)
        src_all = self._indices([p.input for p in pairs])
        targets = [p.target for p in pairs]
        updates = 0
        for _ in range(cfg.epochs):
            epoch_losses = []
            for idx in batches(len(pairs), cfg.batch_size, rng):
                tin, tout, mask = target_arrays(self.vocab, [targets[i] for i in idx])
                loss, grads = self.loss_and_grads(src_all[idx], tin, tout, mask, cfg.teacher_forcing)
                self.record_loss(loss)
                opt.step(self.params, grads)
                epoch_losses.append(loss)
                updates += 1
                if cfg.max_updates and updates >= cfg.max_updates:
                    break
            self.loss_curve.epochs.append(float(np.mean(epoch_losses)))
            if cfg.max_updates and updates >= cfg.max_updates:
                break
        self.meta.update(cfg.to_dict(), updates=updates, final_loss=self.loss_curve.updates[-1])
        return self

    def pair_loss(self, pair, normalize=False) -> float:
        """Total (or per-token) negative log-likelihood of one pair under teacher forcing."""
        tin, tout, mask = target_arrays(self.vocab, [pair.target])
        loss, _ = self.loss_and_grads(self._indices([pair.input]), tin, tout, mask, True, normalize)
        return loss

    # -- inference --------------------------------------------------------

    def predict_with_trace(self, inputs):
        """Greedy decoding from SOS until EOS or 40 tokens.

        Scores of non-need symbols and of needs already emitted are masked to
        ``-inf``; ties go to the lowest index.
        """
        src = self._indices(inputs)
        B = src.shape[0]
        O, _, state = self._encode(src)
        dec = self.decoder
        allowed = self.vocab.need_mask()
        allowed[EOS] = True
        allowed = np.broadcast_to(allowed, (B, self.vocab.size)).copy()
        prev = np.full(B, SOS, dtype=np.int64)
        done = np.zeros(B, dtype=bool)
        emitted = [[] for _ in range(B)]
        alphas = [[] for _ in range(B)]
        for _ in range(MAX_NEEDS):
            scores, state, alpha, _ = self._step(dec, prev, state, O)
            scores = np.where(allowed, scores, -np.inf)
            choice = scores.argmax(axis=1)
            for b in np.flatnonzero(~done):
                alphas[b].append(alpha[b])
                emitted[b].append(int(choice[b]))
                if choice[b] == EOS:
                    done[b] = True
                else:
                    allowed[b, choice[b]] = False
            prev = choice
            if done.all():
                break
        results = []
        for b, inp in enumerate(inputs):
            toks = emitted[b]
            needs = tuple(self.vocab.symbol(i) for i in toks if i != EOS)
            terminated = bool(toks) and toks[-1] == EOS
            symbols = inp.symbols if isinstance(inp, InputSequence) else tuple(self.vocab.decode(src[b]))
            trace = AttentionTrace(np.array(alphas[b]), symbols, tuple(self.vocab.decode(toks)))
            results.append((NeedSequence(needs, terminated), trace))
        return results

    def predict_many(self, inputs):
        out = []
        inputs = list(inputs)
        for start in range(0, len(inputs), 256):
            out.extend(seq for seq, _ in self.predict_with_trace(inputs[start : start + 256]))
        return out

    def predict_traced(self, inp):
        return self.predict_with_trace([inp])[0]

    # -- persistence ------------------------------------------------------

    def tensors(self):
        return dict(self.params)

    def state_meta(self):
        return {"hidden": self.hidden}

    @classmethod
    def from_state(cls, vocab, tensors, meta):
        model = cls(vocab, hidden=int(meta["hidden"]), init_scale=0.0)
        for k in model.params:
            model.params[k] = np.array(tensors[k], dtype=np.float64)
        model.meta = dict(meta)
        return model
