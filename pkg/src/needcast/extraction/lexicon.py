"""Need lexicon: canonical needs, synonym map, stopword lists, review queue."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import FormatError

SECTIONS = ("needs", "synonyms", "stopwords", "event_stopwords")


@dataclass
class NeedLexicon:
    canonical_needs: list[str]
    synonym_map: dict[str, str] = field(default_factory=dict)
    stopwords: set[str] = field(default_factory=set)
    event_stopwords: set[str] = field(default_factory=set)
    review_queue: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.canonical_needs = [n.strip().lower() for n in self.canonical_needs]
        dupes = [n for n, c in Counter(self.canonical_needs).items() if c > 1]
        if dupes:
            raise ValueError(f"duplicate canonical needs: {dupes}")
        self._needs = frozenset(self.canonical_needs)
        bad = {k: v for k, v in self.synonym_map.items() if v not in self._needs}
        if bad:
            raise ValueError(f"synonyms map to non-canonical needs: {bad}")
        clash = self._needs & set(self.stopwords)
        if clash:
            raise ValueError(f"stopwords overlap canonical needs: {sorted(clash)}")

    def __contains__(self, term) -> bool:
        return term in self._needs

    def __len__(self) -> int:
        return len(self.canonical_needs)

    def index(self, need: str) -> int:
        return self.canonical_needs.index(need)

    def is_stopword(self, term: str) -> bool:
        return term in self.stopwords or term in self.event_stopwords

    def review_counts(self) -> list[tuple[str, int]]:
        counts = Counter(self.review_queue)
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def write_review_queue(self, path) -> None:
        lines = [f"{term}\t{count}\n" for term, count in self.review_counts()]
        Path(path).write_text("".join(lines), encoding="utf-8")

    def dumps(self) -> str:
        out = ["[needs]", *self.canonical_needs, "", "[synonyms]"]
        out += [f"{k}={v}" for k, v in self.synonym_map.items()]
        out += ["", "[stopwords]", *sorted(self.stopwords), "", "[event_stopwords]", *sorted(self.event_stopwords)]
        return "\n".join(out) + "\n"


def parse_lexicon(text: str, source: str = "<string>") -> NeedLexicon:
    """Parse the sectioned lexicon format (``[needs]``, ``[synonyms]``, ...)."""
    parts: dict[str, list[tuple[int, str]]] = {s: [] for s in SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in parts:
                raise FormatError(f"{source}:{lineno}: unknown section [{current}]")
            continue
        if current is None:
            raise FormatError(f"{source}:{lineno}: entry outside any section")
        parts[current].append((lineno, line.lower()))

    synonyms = {}
    for lineno, line in parts["synonyms"]:
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: synonym entry must be surface=canonical")
        surface, canonical = (s.strip() for s in line.split("=", 1))
        synonyms[surface] = canonical
    try:
        return NeedLexicon(
            [w for _, w in parts["needs"]],
            synonyms,
            {w for _, w in parts["stopwords"]},
            {w for _, w in parts["event_stopwords"]},
        )
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def load_lexicon(path=None) -> NeedLexicon:
    """Load a lexicon file, or the bundled default when *path* is None."""
    if path is None:
        text = resources.files("needcast").joinpath("data/default_lexicon.txt").read_text(encoding="utf-8")
        return parse_lexicon(text, "default_lexicon.txt")
    path = Path(path)
    return parse_lexicon(path.read_text(encoding="utf-8"), str(path))


def default_lexicon() -> NeedLexicon:
    return load_lexicon(None)
