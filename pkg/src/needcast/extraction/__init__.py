"""Need identification, term extraction and normalisation."""

from .classifier import (
    NEED,
    NON_NEED,
    ClassifierMetrics,
    LabeledTweet,
    LexiconClassifier,
    NeedClassifier,
    classify,
    train_classifier,
)
from .lexicon import NeedLexicon, default_lexicon, load_lexicon, parse_lexicon
from .tagger import RuleTagger, Tagger, tokenize
from .terms import ExtractionStats, HourlyNeeds, extract_terms, lemma_candidates, normalize, top40

__all__ = [
    "NEED",
    "NON_NEED",
    "ClassifierMetrics",
    "ExtractionStats",
    "HourlyNeeds",
    "LabeledTweet",
    "LexiconClassifier",
    "NeedClassifier",
    "NeedLexicon",
    "RuleTagger",
    "Tagger",
    "classify",
    "default_lexicon",
    "extract_terms",
    "lemma_candidates",
    "load_lexicon",
    "normalize",
    "parse_lexicon",
    "tokenize",
    "top40",
    "train_classifier",
]
