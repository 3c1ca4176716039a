"""Need-term extraction, hourly top-40 selection, and normalisation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..corpus import HourBlock, Tweet
from .lexicon import NeedLexicon
from .tagger import CONTENT_TAGS, tokenize

TOP_TERMS = 40


@dataclass
class ExtractionStats:
    tagger_failures: int = 0
    tweets: int = 0


@dataclass(frozen=True)
class HourlyNeeds:
    block: HourBlock
    needs: tuple[str, ...]
    counts: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.needs)) != len(self.needs):
            raise ValueError("hourly needs must not repeat")
        if len(self.needs) > TOP_TERMS:
            raise ValueError(f"at most {TOP_TERMS} needs per block")


def extract_terms(tweet: Tweet, tagger, lexicon: NeedLexicon, stats: ExtractionStats | None = None) -> list[str]:
    """Nouns, verbs and adjectives of *tweet*, lowercased, minus stopwords, in order."""
    tokens = tokenize(tweet.text)
    try:
        tags = list(tagger.tag(tokens))
    except Exception:
        tags = [None] * len(tokens)
    if len(tags) != len(tokens):
        raise ValueError(f"tagger returned {len(tags)} tags for {len(tokens)} tokens")
    out = []
    for tok, tag in zip(tokens, tags):
        if tag is None:
            if stats is not None:
                stats.tagger_failures += 1
            continue
        if tag not in CONTENT_TAGS:
            continue
        low = tok.lower()
        if lexicon.is_stopword(low):
            continue
        out.append(low)
    if stats is not None:
        stats.tweets += 1
    return out


def top40(block: HourBlock, records, limit: int = TOP_TERMS) -> HourlyNeeds:
    """The *limit* most frequent terms over a block's term lists.

    Ties break lexicographically ascending.
    """
    counts = Counter(term for terms in records for term in terms)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]
    return HourlyNeeds(block, tuple(t for t, _ in ranked), dict(ranked))


def lemma_candidates(term: str) -> list[str]:
    """Suffix-stripped variants of *term*, most specific rule first."""
    out: list[str] = []

    def add(w):
        if len(w) >= 2 and w != term and w not in out:
            out.append(w)

    if term.endswith("ies") and len(term) > 4:
        add(term[:-3] + "y")
    if term.endswith("es") and len(term) > 3:
        add(term[:-2])
    if term.endswith("s") and not term.endswith("ss") and len(term) > 2:
        add(term[:-1])
    for suffix in ("ing", "ed"):
        if term.endswith(suffix) and len(term) > len(suffix) + 1:
            stem = term[: -len(suffix)]
            if suffix == "ed" and stem.endswith("i"):
                add(stem[:-1] + "y")
            add(stem)
            add(stem + "e")
            if len(stem) > 2 and stem[-1] == stem[-2]:
                add(stem[:-1])
    return out


def normalize(term: str, lexicon: NeedLexicon, record_miss: bool = True) -> str | None:
    """Map a surface term onto its canonical need, or ``None``.

    Candidates are tried in order: the term itself, its lemma variants, then
    synonym lookups of the term and of each lemma.  Misses are appended to the
    lexicon's review queue.
    """
    term = term.strip().lower()
    if term in lexicon:
        return term
    lemmas = lemma_candidates(term)
    for cand in lemmas:
        if cand in lexicon:
            return cand
    for cand in [term, *lemmas]:
        hit = lexicon.synonym_map.get(cand)
        if hit is not None:
            return hit
    if record_miss:
        lexicon.review_queue.append(term)
    return None
