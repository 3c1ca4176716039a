"""End-to-end glue: aligned tweets and weather to training pairs, splits, models."""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .baselines import ConvClassifier, GenerativeLSTM, TrigramForecaster
from .base import TrainConfig
from .corpus import AlignedRecord, parse_tweet, align
from .encoding import TrainingPair, build_input, build_target
from .errors import FormatError
from .extraction import (
    NEED,
    ExtractionStats,
    HourlyNeeds,
    LabeledTweet,
    LexiconClassifier,
    NeedClassifier,
    NeedLexicon,
    RuleTagger,
    classify,
    extract_terms,
    normalize,
    top40,
)
from .forecaster import Seq2SeqForecaster


def lexicon_tagger(lexicon: NeedLexicon) -> RuleTagger:
    return RuleTagger([*lexicon.canonical_needs, *lexicon.synonym_map])


def load_labeled(path) -> list[LabeledTweet]:
    """JSON-lines tweets carrying an extra ``label`` key (need / non-need)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(LabeledTweet(parse_tweet(obj), obj["label"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad labelled tweet: {exc}") from None
    return out


def as_predicate(classifier):
    """Turn a NeedClassifier or a tweet -> label callable into tweet -> bool."""
    if isinstance(classifier, NeedClassifier):
        return lambda tw: classify(classifier, tw) == NEED
    return lambda tw: classifier(tw) == NEED


@dataclass
class Extraction:
    records: list[AlignedRecord]
    pairs: list[TrainingPair]
    hourly: list[HourlyNeeds]  # canonical needs per block with frequencies
    stats: ExtractionStats
    need_tweets: int = 0
    excluded: list = field(default_factory=list)  # blocks with no needs
    tweet_needs: dict = field(default_factory=dict)  # tweet id -> canonical needs


def extract_pairs(records, lexicon: NeedLexicon, classifier=None, tagger=None) -> Extraction:
    """Classify, extract, rank and normalise tweets of each aligned block.

    Per block the 40 most frequent surface terms over its need tweets are kept;
    each tweet's surviving terms are normalised and fed to ``build_target``.
    Blocks left without needs are reported in ``excluded`` and yield no pair.
    """
    tagger = tagger or lexicon_tagger(lexicon)
    is_need = as_predicate(classifier or LexiconClassifier(lexicon, tagger))
    stats = ExtractionStats()
    pairs, hourly, excluded = [], [], []
    tweet_needs = {}
    n_need = 0
    for rec in records:
        terms = {}
        for tw in rec.tweets:
            if is_need(tw):
                n_need += 1
                terms[tw.id] = extract_terms(tw, tagger, lexicon, stats)
        keep = set(top40(rec.block, terms.values()).needs) if terms else set()
        per_tweet = {}
        freq: Counter = Counter()
        for tid, ts in terms.items():
            found = []
            for t in ts:
                if t not in keep:
                    continue
                canon = normalize(t, lexicon)
                if canon is not None:
                    found.append(canon)
                    freq[canon] += 1
            per_tweet[tid] = found
            tweet_needs[tid] = tuple(dict.fromkeys(found))
        target = build_target(rec, per_tweet)
        ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:40]
        hourly.append(HourlyNeeds(rec.block, tuple(n for n, _ in ranked), dict(ranked)))
        if target.empty:
            excluded.append(rec.block)
            continue
        pairs.append(TrainingPair(build_input(rec), target, rec.block))
    if not pairs:
        warnings.warn("no block produced any need; zero training pairs", stacklevel=2)
    return Extraction(list(records), pairs, hourly, stats, n_need, excluded, tweet_needs)


def run_extraction(tweets, weather, lexicon, classifier=None, default_location=None) -> Extraction:
    return extract_pairs(align(tweets, weather, default_location), lexicon, classifier)


def split_pairs(pairs, split: float = 0.8, seed: int = 0):
    """Seeded block-level random split; identical for every model type.

    ``split=1`` keeps every pair for training and leaves the test side empty.
    """
    pairs = list(pairs)
    if not 0 < split <= 1:
        raise ValueError("split must lie in (0, 1]")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_train = int(round(split * len(pairs)))
    return [pairs[i] for i in sorted(order[:n_train])], [pairs[i] for i in sorted(order[n_train:])]


def make_model(kind: str, vocab, cfg: TrainConfig):
    if kind == "seq2seq":
        return Seq2SeqForecaster(vocab, cfg.hidden, cfg.seed)
    if kind == "genlstm":
        return GenerativeLSTM(vocab, cfg.hidden, cfg.dropout, cfg.seed)
    if kind == "cnn":
        return ConvClassifier(vocab, cfg.dropout, cfg.seed)
    if kind == "trigram":
        return TrigramForecaster(vocab)
    raise ValueError(f"unknown model type {kind!r}")
