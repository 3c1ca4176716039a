"""Add-one smoothed trigram generator over joined weather+need token streams."""

from __future__ import annotations

from collections import Counter, defaultdict

import numpy as np

from ..base import Forecaster, TrainConfig, usable_pairs
from ..encoding import MAX_NEEDS, NeedSequence
from ..errors import TrainingError

END = "."
PAD = None  # sentence-start padding


class TrigramModel:
    """Counts ``(w1, w2) -> w3`` and serves add-``k`` smoothed conditionals.

    ``tokens`` lists every continuation symbol; its order is the tie-break
    order for greedy generation (earlier wins).
    """

    def __init__(self, counts, tokens, smoothing: float = 1.0):
        self.counts: dict[tuple, Counter] = counts
        self.tokens: list[str] = list(tokens)
        self.rank = {t: i for i, t in enumerate(self.tokens)}
        self.smoothing = smoothing
        self.totals = {ctx: sum(c.values()) for ctx, c in counts.items()}

    @property
    def V(self) -> int:
        return len(self.tokens)

    def count(self, w1, w2, w3) -> int:
        c = self.counts.get((w1, w2))
        return c[w3] if c else 0

    def prob(self, w3, w1, w2) -> float:
        k = self.smoothing
        return (self.count(w1, w2, w3) + k) / (self.totals.get((w1, w2), 0) + k * self.V)

    def distribution(self, w1, w2) -> dict:
        return {t: self.prob(t, w1, w2) for t in self.tokens}

    def best(self, w1, w2, candidates):
        """Most frequent continuation among *candidates*; ties by token order."""
        c = self.counts.get((w1, w2), Counter())
        return min(candidates, key=lambda t: (-c[t], self.rank.get(t, len(self.rank))))

    def generate(self, history, need_tokens, max_len: int = MAX_NEEDS) -> tuple[list[str], bool]:
        """Greedy continuation of *history* restricted to unseen needs and END.

        Returns ``(needs, terminated)``; ``terminated`` is False when the
        length cap stopped generation.
        """
        ctx = [PAD, PAD, *history][-2:]
        remaining = [t for t in self.tokens if t in need_tokens]
        out = []
        for _ in range(max_len):
            nxt = self.best(ctx[0], ctx[1], [END, *remaining])
            if nxt == END:
                return out, True
            out.append(nxt)
            remaining.remove(nxt)
            ctx = [ctx[1], nxt]
        return out, False


def trigram_train(sequences, smoothing: float = 1.0, order=None) -> TrigramModel:
    """Count trigrams over END-terminated sequences padded with two start pads.

    Sequences lacking the END symbol get one appended.  Token order defaults to
    END first, then first appearance.
    """
    counts: dict[tuple, Counter] = defaultdict(Counter)
    seen: dict[str, None] = {END: None}
    n = 0
    for seq in sequences:
        seq = list(seq)
        if not seq:
            continue
        if seq[-1] != END:
            seq.append(END)
        n += 1
        padded = [PAD, PAD, *seq]
        for a, b, c in zip(padded, padded[1:], padded[2:]):
            counts[(a, b)][c] += 1
        for t in seq:
            seen.setdefault(t, None)
    if n == 0:
        raise TrainingError("trigram training needs a nonempty corpus")
    tokens = list(seen)
    if order is not None:
        rank = {t: i for i, t in enumerate(order)}
        tokens.sort(key=lambda t: rank.get(t, len(rank)))
    return TrigramModel(dict(counts), tokens, smoothing)


class TrigramForecaster(Forecaster):
    model_type = "trigram"

    def __init__(self, vocab, smoothing: float = 1.0):
        super().__init__(vocab)
        self.smoothing = smoothing
        self.model: TrigramModel | None = None

    def _order(self):
        return [END, *self.vocab.index_to_symbol]

    def fit(self, pairs, cfg: TrainConfig | None = None):
        pairs = usable_pairs(pairs)
        seqs = [[*p.input.symbols, *p.target.needs, END] for p in pairs]
        self.model = trigram_train(seqs, self.smoothing, self._order())
        self.meta.update({"smoothing": self.smoothing, "sequences": len(seqs)})
        if cfg is not None:
            self.meta["seed"] = cfg.seed
        return self

    def predict_many(self, inputs):
        out = []
        for inp in inputs:
            needs, done = self.model.generate(list(inp.symbols), self.vocab.needs)
            out.append(NeedSequence(tuple(needs), done))
        return out

    def tensors(self):
        idx = {t: i for i, t in enumerate(self.model.tokens)}
        rows = []
        for (a, b), cnt in sorted(
            self.model.counts.items(), key=lambda kv: (idx.get(kv[0][0], -1), idx.get(kv[0][1], -1))
        ):
            for c in sorted(cnt, key=idx.__getitem__):
                rows.append((idx.get(a, -1), idx.get(b, -1), idx[c], cnt[c]))
        return {"counts": np.array(rows, dtype=np.int64).reshape(-1, 4)}

    def state_meta(self):
        return {"tokens": self.model.tokens, "smoothing": self.smoothing}

    @classmethod
    def from_state(cls, vocab, tensors, meta):
        tokens = list(meta["tokens"])
        counts: dict[tuple, Counter] = defaultdict(Counter)
        for a, b, c, n in tensors["counts"].tolist():
            key = (tokens[a] if a >= 0 else PAD, tokens[b] if b >= 0 else PAD)
            counts[key][tokens[c]] = n
        model = cls(vocab, float(meta["smoothing"]))
        model.model = TrigramModel(dict(counts), tokens, float(meta["smoothing"]))
        model.meta = dict(meta)
        return model
