"""Linear SVM need-tweet classifier trained by stochastic subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import Tweet
from ..errors import TrainingError
from .tagger import tokenize
from .terms import extract_terms, normalize

NEED = "need"
NON_NEED = "non-need"
LABELS = (NEED, NON_NEED)


@dataclass(frozen=True)
class LabeledTweet:
    tweet: Tweet
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass
class NeedClassifier:
    vocabulary: dict[str, int]
    weights: np.ndarray  # last entry is the bias
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights.shape != (len(self.vocabulary) + 1,):
            raise ValueError("weight vector must have vocabulary size + 1 entries")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("classifier weights must be finite")

    def features(self, text: str) -> np.ndarray:
        x = np.zeros(len(self.vocabulary) + 1)
        for tok in classifier_tokens(text):
            j = self.vocabulary.get(tok)
            if j is not None:
                x[j] += 1.0
        x[-1] = 1.0
        return x

    def score(self, text: str) -> float:
        return float(self.features(text) @ self.weights)


@dataclass(frozen=True)
class ClassifierMetrics:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    n_test: int

    def format(self) -> str:
        return (
            f"accuracy={self.accuracy:.3f} precision={self.precision:.3f} "
            f"recall={self.recall:.3f} f-measure={self.f_measure:.3f}"
        )


def classifier_tokens(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


def classify(model: NeedClassifier, tweet: Tweet) -> str:
    """``need`` when the linear score is strictly positive."""
    return NEED if model.score(tweet.text) > 0 else NON_NEED


def evaluate(model: NeedClassifier, data) -> ClassifierMetrics:
    tp = fp = fn = tn = 0
    for item in data:
        pred = classify(model, item.tweet) == NEED
        gold = item.label == NEED
        tp += pred and gold
        fp += pred and not gold
        fn += gold and not pred
        tn += not pred and not gold
    n = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassifierMetrics((tp + tn) / n if n else 0.0, precision, recall, f1, n)


def train_classifier(
    data,
    split: float = 0.7,
    seed: int = 0,
    epochs: int = 20,
    reg: float = 1e-4,
    lr: float = 0.1,
) -> tuple[NeedClassifier, ClassifierMetrics]:
    """Fit a hinge-loss linear classifier on bag-of-words counts.

    Uses stochastic subgradient steps with step size ``lr / t`` in epoch ``t``; the first
    ``split`` fraction of a seeded shuffle trains, the rest is held out for the
    returned metrics.
    """
    data = list(data)
    if not 0 < split < 1:
        raise ValueError("split must lie strictly between 0 and 1")
    n_need = sum(d.label == NEED for d in data)
    n_other = len(data) - n_need
    if n_need < 2 or n_other < 2:
        raise TrainingError(f"need >= 2 examples per class, got {n_need} need / {n_other} non-need")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    n_train = min(max(1, int(round(split * len(data)))), len(data) - 1)
    train = [data[i] for i in order[:n_train]]
    test = [data[i] for i in order[n_train:]]

    vocab: dict[str, int] = {}
    for item in train:
        for tok in classifier_tokens(item.tweet.text):
            vocab.setdefault(tok, len(vocab))
    if len({d.label for d in train}) < 2:
        raise TrainingError("training split holds a single class; use more data or another seed")

    X = np.zeros((len(train), len(vocab) + 1))
    for r, item in enumerate(train):
        for tok in classifier_tokens(item.tweet.text):
            X[r, vocab[tok]] += 1.0
    X[:, -1] = 1.0
    y = np.array([1.0 if d.label == NEED else -1.0 for d in train])

    w = np.zeros(len(vocab) + 1)
    for t in range(1, epochs + 1):
        eta = lr / t
        for r in rng.permutation(len(train)):
            grad = reg * w
            grad[-1] = 0.0  # bias is not regularised
            if y[r] * (X[r] @ w) < 1.0:
                grad = grad - y[r] * X[r]
            w -= eta * grad

    meta = {"epochs": epochs, "reg": reg, "lr": lr, "seed": seed, "split": split}
    model = NeedClassifier(vocab, w, meta)
    return model, evaluate(model, test)


class LexiconClassifier:
    """Fallback used when no labelled tweets are available: a tweet is a need
    tweet when any extracted term normalises into the lexicon."""

    def __init__(self, lexicon, tagger):
        self.lexicon = lexicon
        self.tagger = tagger

    def __call__(self, tweet: Tweet) -> str:
        terms = extract_terms(tweet, self.tagger, self.lexicon)
        hit = any(normalize(t, self.lexicon, record_miss=False) for t in terms)
        return NEED if hit else NON_NEED
