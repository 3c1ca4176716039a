"""Tokenisation and a small rule-based part-of-speech tagger.

Any object with a ``tag(tokens) -> list[str | None]`` method can stand in for
:class:`RuleTagger`, e.g. an adapter around a full parser.  A ``None`` tag
marks a token the tagger could not handle.
"""

from __future__ import annotations

import re
from typing import Iterable, Protocol, Sequence

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+")
TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9']*")

CONTENT_TAGS = frozenset({"NOUN", "VERB", "ADJ"})

_CLOSED_CLASS = {
    "PRON": "i me my mine myself we us our ours ourselves you your yours yourself yourselves he him his himself "
    "she her hers herself it its itself they them their theirs themselves who whom whose this that these those "
    "someone anyone everyone somebody anybody everybody something anything everything nothing",
    "DET": "a an the some any each every no all both either neither",
    "ADP": "at in on of for to from with by about into onto over under after before during through between "
    "against without within across near around via",
    "CONJ": "and or but nor so yet because if while although though unless",
    "AUX": "am is are was were be been being do does did have has had will would shall should can could may "
    "might must don't doesn't didn't can't won't isn't aren't wasn't weren't i'm it's we're they're",
    "ADV": "not very too also just now then there here still again already soon always never really only even "
    "asap",
    "PART": "rt amp",
}
CLOSED_CLASS = {w: tag for tag, words in _CLOSED_CLASS.items() for w in words.split()}

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ish")


def tokenize(text: str) -> list[str]:
    """Split tweet text into word tokens, dropping URLs and @-mentions.

    Case is preserved so a tagger can use capitalisation; ``#`` is stripped
    from hashtags.
    """
    text = URL_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    return TOKEN_RE.findall(text.replace("’", "'"))


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str | None]: ...


class RuleTagger:
    """Closed-class lookup plus suffix heuristics; everything else is a noun.

    Capitalised tokens after the first position are proper nouns unless their
    lowercase form is in ``known_words``.
    """

    def __init__(self, known_words: Iterable[str] = ()):
        self.known_words = {w.lower() for w in known_words}

    def tag_word(self, token: str, position: int) -> str:
        low = token.lower()
        if low in CLOSED_CLASS:
            return CLOSED_CLASS[low]
        if any(ch.isdigit() for ch in low):
            return "NUM"
        if position > 0 and token[0].isupper() and low not in self.known_words:
            return "PROPN"
        if low in self.known_words:
            return "NOUN"
        if low.endswith("ly") and len(low) > 4:
            return "ADV"
        if low.endswith("ing") and len(low) > 4:
            return "VERB"
        if low.endswith("ed") and len(low) > 3:
            return "ADJ"
        if low.endswith(_ADJ_SUFFIXES) and len(low) > 5:
            return "ADJ"
        return "NOUN"

    def tag(self, tokens):
        return [self.tag_word(tok, i) for i, tok in enumerate(tokens)]
