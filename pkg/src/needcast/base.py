"""Training configuration and the interface shared by all need forecasters."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .encoding import EOS, SOS, InputSequence, NeedSequence, SymbolVocabulary, TrainingPair
from .errors import NumericError, TrainingError


@dataclass
class TrainConfig:
    epochs: int = 100
    hidden: int = 256
    seed: int = 0
    lr: float = 1e-3
    teacher_forcing: bool = True
    split: float = 0.8
    batch_size: int = 16
    max_updates: int | None = None
    optimizer: str = "adam"
    clip: float = 5.0
    dropout: float = 0.2

    def __post_init__(self):
        if not 0 < self.split <= 1:
            raise ValueError("split must lie in (0, 1]; 1 trains on every pair")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossCurve:
    updates: list[float] = field(default_factory=list)
    epochs: list[float] = field(default_factory=list)

    def csv_rows(self):
        return [(i + 1, f"{v:.10g}") for i, v in enumerate(self.updates)]

    def windowed(self, width: int = 100) -> np.ndarray:
        """Mean loss over consecutive non-overlapping windows of *width* updates."""
        n = len(self.updates) // width
        return np.asarray(self.updates[: n * width]).reshape(n, width).mean(axis=1)


class Forecaster:
    """Common surface: ``fit`` on training pairs, ``predict`` need sequences.

    Subclasses set ``model_type`` and implement ``fit``, ``predict_many``,
    ``tensors`` and ``from_state``.
    """

    model_type = "base"

    def __init__(self, vocab: SymbolVocabulary):
        self.vocab = vocab
        self.loss_curve = LossCurve()
        self.meta: dict = {}

    def record_loss(self, loss: float) -> None:
        """Append one update's loss; a non-finite value aborts training."""
        if not np.isfinite(loss):
            raise NumericError(f"loss became {loss} at update {len(self.loss_curve.updates) + 1}")
        self.loss_curve.updates.append(loss)

    def predict(self, inp: InputSequence) -> NeedSequence:
        return self.predict_many([inp])[0]

    def predict_many(self, inputs) -> list[NeedSequence]:
        raise NotImplementedError

    def fit(self, pairs, cfg: TrainConfig):
        raise NotImplementedError

    def tensors(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def state_meta(self) -> dict:
        """Structural settings needed to rebuild the model from its tensors."""
        return {}

    @classmethod
    def from_state(cls, vocab, tensors, meta):
        raise NotImplementedError


def usable_pairs(pairs, minimum: int = 2) -> list[TrainingPair]:
    """Drop pairs with empty targets (warning with count); enforce a minimum."""
    pairs = list(pairs)
    kept = [p for p in pairs if not p.target.empty]
    if len(kept) < len(pairs):
        warnings.warn(f"skipped {len(pairs) - len(kept)} pair(s) with empty targets", stacklevel=3)
    if len(kept) < minimum:
        raise TrainingError(f"need at least {minimum} non-empty training pairs, got {len(kept)}")
    return kept


def target_arrays(vocab: SymbolVocabulary, targets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Teacher-forcing inputs, outputs (EOS-terminated) and a 0/1 mask, padded."""
    seqs = [[vocab.index(n) for n in t.needs] + [EOS] for t in targets]
    T = max(len(s) for s in seqs)
    out = np.full((len(seqs), T), EOS, dtype=np.int64)
    inp = np.full((len(seqs), T), EOS, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for r, s in enumerate(seqs):
        out[r, : len(s)] = s
        inp[r, 0] = SOS
        inp[r, 1 : len(s)] = s[:-1]
        mask[r, : len(s)] = 1.0
    return inp, out, mask


def batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, size):
        yield order[start : start + size]
