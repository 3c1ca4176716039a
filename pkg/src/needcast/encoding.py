"""Encoder input symbols, decoder need targets, the joint vocabulary, one-hot."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping

import numpy as np

from .corpus import AlignedRecord, HourBlock
from .errors import FormatError
from .fileio import atomic_write_text

SOS, EOS, UNK = 0, 1, 2
RESERVED = ("[SOS]", "[EOS]", "[UNK]")
INPUT_LEN = 8
MAX_NEEDS = 40
INPUT_FIELDS = ("location", "month_day", "days", "hour", "wind", "pressure", "storm_type", "category")
PAIRS_HEADER = ("location", "date", "day", "hour", "wind_bin", "pressure_bin", "type", "category", "needs")

WIND_MIN, WIND_MAX, WIND_STEP = 15.0, 200.0, 5.0
PRESSURE_MIN, PRESSURE_MAX = 950.0, 1020.0


def bin_wind(speed: float) -> str:
    """5 mph bins over 15..200 mph; values outside clamp to the end bins."""
    if speed < 0:
        raise ValueError("wind speed must be >= 0")
    s = min(max(speed, WIND_MIN), WIND_MAX)
    return f"W{int(math.floor((s - WIND_MIN) / WIND_STEP))}"


def bin_pressure(pressure: float) -> str:
    """1 mb bins over 950..1020 mb, clamped."""
    if pressure <= 0:
        raise ValueError("pressure must be > 0")
    p = min(max(pressure, PRESSURE_MIN), PRESSURE_MAX)
    return f"P{int(math.floor(p - PRESSURE_MIN))}"


@dataclass(frozen=True)
class InputSequence:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) != INPUT_LEN:
            raise ValueError(f"input sequence must have exactly {INPUT_LEN} symbols, got {len(self.symbols)}")

    @classmethod
    def parse(cls, text: str) -> InputSequence:
        parts = [p.strip() for p in text.replace(",", " ").split()]
        return cls(tuple(parts))

    @property
    def location(self) -> str:
        return self.symbols[0]


@dataclass(frozen=True)
class NeedSequence:
    needs: tuple[str, ...]
    terminated: bool = True

    def __post_init__(self):
        if len(set(self.needs)) != len(self.needs):
            raise ValueError(f"need sequence repeats a need: {self.needs}")
        if len(self.needs) > MAX_NEEDS:
            raise ValueError(f"need sequence longer than {MAX_NEEDS}")

    def __len__(self):
        return len(self.needs)

    @property
    def empty(self) -> bool:
        return not self.needs


@dataclass(frozen=True)
class TrainingPair:
    input: InputSequence
    target: NeedSequence
    block: HourBlock

    def __post_init__(self):
        if self.input.location != self.block.location:
            raise ValueError("input sequence and block refer to different locations")


def build_input(record: AlignedRecord) -> InputSequence:
    w = record.weather
    b = record.block
    return InputSequence(
        (
            b.location,
            f"{b.date.month:02d}-{b.date.day:02d}",
            f"D{w.days_since_formed}",
            f"H{b.hour}",
            bin_wind(w.wind_speed),
            bin_pressure(w.pressure),
            w.storm_type,
            f"C{w.category}",
        )
    )


def build_target(record: AlignedRecord, tweet_needs: Mapping[str, Iterable[str]]) -> NeedSequence:
    """Order a block's needs by tweet time, alphabetically inside one tweet.

    *tweet_needs* maps tweet id to that tweet's canonical needs.  Repeats keep
    their first position; the result is cut at 40 needs.
    """
    seen: dict[str, None] = {}
    for tw in sorted(record.tweets, key=lambda t: (t.timestamp, t.id)):
        for need in sorted(set(tweet_needs.get(tw.id, ()))):
            seen.setdefault(need, None)
    return NeedSequence(tuple(seen)[:MAX_NEEDS], terminated=True)


class SymbolVocabulary:
    """Dense symbol <-> index map with SOS/EOS/UNK reserved at 0/1/2."""

    def __init__(self, symbols: Iterable[str] = (), need_symbols: Iterable[str] = ()):
        self.index_to_symbol: list[str] = list(RESERVED)
        self.symbol_to_index: dict[str, int] = {s: i for i, s in enumerate(RESERVED)}
        for s in symbols:
            self.add(s)
        self.needs: set[str] = set()
        for s in need_symbols:
            self.add(s)
            self.needs.add(s)

    def add(self, symbol: str) -> int:
        idx = self.symbol_to_index.get(symbol)
        if idx is None:
            idx = len(self.index_to_symbol)
            self.symbol_to_index[symbol] = idx
            self.index_to_symbol.append(symbol)
        return idx

    @property
    def size(self) -> int:
        return len(self.index_to_symbol)

    def __len__(self):
        return self.size

    def __contains__(self, symbol):
        return symbol in self.symbol_to_index

    def index(self, symbol: str) -> int:
        return self.symbol_to_index.get(symbol, UNK)

    def symbol(self, index: int) -> str:
        return self.index_to_symbol[index]

    def encode(self, symbols: Iterable[str]) -> np.ndarray:
        return np.array([self.index(s) for s in symbols], dtype=np.int64)

    def decode(self, indices: Iterable[int]) -> list[str]:
        return [self.index_to_symbol[int(i)] for i in indices]

    def need_mask(self) -> np.ndarray:
        """Boolean mask of need symbols (EOS excluded)."""
        mask = np.zeros(self.size, dtype=bool)
        for s in self.needs:
            mask[self.symbol_to_index[s]] = True
        return mask

    def need_indices(self) -> np.ndarray:
        return np.flatnonzero(self.need_mask())

    def __eq__(self, other):
        return (
            isinstance(other, SymbolVocabulary)
            and self.index_to_symbol == other.index_to_symbol
            and self.needs == other.needs
        )


def build_vocab(pairs: Iterable[TrainingPair]) -> SymbolVocabulary:
    """Reserved symbols, then input symbols and needs in first-seen order."""
    vocab = SymbolVocabulary()
    empty = True
    for pair in pairs:
        empty = False
        for s in pair.input.symbols:
            vocab.add(s)
        for n in pair.target.needs:
            vocab.add(n)
            vocab.needs.add(n)
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return vocab


def one_hot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise IndexError(f"index {index} out of range for size {size}")
    v = np.zeros(size)
    v[index] = 1.0
    return v


def pairs_to_csv(pairs: Iterable[TrainingPair]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAIRS_HEADER)
    for p in pairs:
        s = p.input.symbols
        w.writerow([s[0], p.block.date.isoformat(), s[2], s[3], s[4], s[5], s[6], s[7], " ".join(p.target.needs)])
    return buf.getvalue()


def write_pairs(path, pairs) -> None:
    atomic_write_text(path, pairs_to_csv(pairs))


def read_pairs(path) -> list[TrainingPair]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PAIRS_HEADER:
            raise FormatError(f"{path}: expected header {','.join(PAIRS_HEADER)}")
        out = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(PAIRS_HEADER):
                raise FormatError(f"{path}:{reader.line_num}: expected {len(PAIRS_HEADER)} fields")
            loc, day_s, days, hour, wind, pres, stype, cat, needs = row
            try:
                d = date.fromisoformat(day_s)
                h = int(hour.lstrip("H"))
            except ValueError:
                raise FormatError(f"{path}:{reader.line_num}: bad date/hour {day_s!r}/{hour!r}") from None
            inp = InputSequence((loc, f"{d.month:02d}-{d.day:02d}", days, hour, wind, pres, stype, cat))
            out.append(TrainingPair(inp, NeedSequence(tuple(needs.split())), HourBlock(d, h, loc)))
    return out
