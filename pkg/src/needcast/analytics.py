"""SMC scoring, accuracy aggregation and descriptive need statistics."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from functools import lru_cache
from itertools import combinations
from pathlib import Path

from .errors import ValidationError
from .extraction import default_lexicon
from .fileio import write_csv_rows

CORPUS_SIZE = 75
FLOW_TOP = 24


@lru_cache(maxsize=1)
def _default_needs() -> frozenset:
    return frozenset(default_lexicon().canonical_needs)


def _needs(x):
    return tuple(getattr(x, "needs", x))


def match_counts(predicted, actual, corpus_size: int = CORPUS_SIZE, canonical=None) -> tuple[int, int, int, int]:
    """``(M00, M01, M10, M11)`` of the two need sets over the need corpus.

    M10 counts needs predicted but absent, M01 needs present but not predicted.
    """
    a, b = set(_needs(predicted)), set(_needs(actual))
    canonical = _default_needs() if canonical is None else canonical
    unknown = sorted((a | b) - set(canonical))
    if unknown:
        raise ValidationError(f"non-canonical need(s): {', '.join(unknown)}")
    m11 = len(a & b)
    m10 = len(a - b)
    m01 = len(b - a)
    m00 = corpus_size - m11 - m10 - m01
    if m00 < 0:
        raise ValidationError(f"need sets span more than the corpus size {corpus_size}")
    return m00, m01, m10, m11


def smc(predicted, actual, corpus_size: int = CORPUS_SIZE, canonical=None) -> float:
    """Simple matching coefficient: share of corpus needs on which both agree."""
    m00, _, _, m11 = match_counts(predicted, actual, corpus_size, canonical)
    return (m00 + m11) / corpus_size


@dataclass
class SMCReport:
    per_block: dict
    counts: dict
    daily: dict
    per_city: dict
    overall: float
    per_event: dict = field(default_factory=dict)

    def block_rows(self):
        for b in sorted(self.per_block):
            yield (b.date.isoformat(), b.hour, b.location, *self.counts[b], f"{self.per_block[b]:.6f}")

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        n_day = Counter(b.date for b in self.per_block)
        n_city = Counter(b.location for b in self.per_block)
        files = [out / "smc_by_day.csv", out / "smc_by_city.csv", out / "smc_by_block.csv", out / "smc_overall.csv"]
        write_csv_rows(files[0], ("date", "smc", "blocks"), [(d.isoformat(), f"{v:.6f}", n_day[d]) for d, v in sorted(self.daily.items())])
        write_csv_rows(files[1], ("city", "smc", "blocks"), [(c, f"{v:.6f}", n_city[c]) for c, v in sorted(self.per_city.items())])
        write_csv_rows(files[2], ("date", "hour", "location", "m00", "m01", "m10", "m11", "smc"), self.block_rows())
        write_csv_rows(files[3], ("blocks", "smc"), [(len(self.per_block), f"{self.overall:.6f}")])
        if self.per_event:
            files.append(out / "smc_by_event.csv")
            write_csv_rows(files[-1], ("event", "smc"), [(e, f"{v:.6f}") for e, v in sorted(self.per_event.items())])
        return files


def _mean_by(scores: dict, key) -> dict:
    groups = defaultdict(list)
    for b, v in scores.items():
        groups[key(b)].append(v)
    return {k: math.fsum(vs) / len(vs) for k, vs in groups.items()}


def aggregate(block_counts: dict, corpus_size: int = CORPUS_SIZE, events: dict | None = None) -> SMCReport:
    """Unweighted means of per-block SMC by day, city, optional event, overall.

    *block_counts* maps HourBlock -> (M00, M01, M10, M11).
    """
    if not block_counts:
        raise ValidationError("aggregate needs at least one block")
    per_block = {b: (c[0] + c[3]) / corpus_size for b, c in block_counts.items()}
    per_event = _mean_by(per_block, events.__getitem__) if events else {}
    return SMCReport(
        per_block,
        dict(block_counts),
        _mean_by(per_block, lambda b: b.date),
        _mean_by(per_block, lambda b: b.location),
        math.fsum(per_block.values()) / len(per_block),
        per_event,
    )


def evaluate_pairs(pairs, predictions, corpus_size: int = CORPUS_SIZE, canonical=None, events=None) -> SMCReport:
    counts = {
        p.block: match_counts(pred, p.target, corpus_size, canonical) for p, pred in zip(pairs, predictions, strict=True)
    }
    return aggregate(counts, corpus_size, events)


# -- descriptive statistics ------------------------------------------------


def concern_flow(hourly, top: int = FLOW_TOP) -> dict:
    """Per date, the *top* most frequent needs as ``(need, count)``; ties by name."""
    per_day: dict = defaultdict(Counter)
    for h in hourly:
        per_day[h.block.date].update(h.counts)
    return {
        d: sorted(((n, c) for n, c in cnt.items() if c >= 1), key=lambda kv: (-kv[1], kv[0]))[:top]
        for d, cnt in sorted(per_day.items())
    }


def tweet_rate(tweets, is_need, block_width: int = 4):
    """Rows ``(block_start, total, need_count)`` over fixed-width blocks.

    Blocks tile every day from midnight UTC, covering each day that has tweets
    from first to last, empty blocks included.
    """
    if 24 % block_width:
        raise ValueError("block_width must divide 24")
    tweets = list(tweets)
    if not tweets:
        return []
    total: Counter = Counter()
    need: Counter = Counter()
    for tw in tweets:
        ts = tw.timestamp
        start = ts.replace(hour=ts.hour - ts.hour % block_width, minute=0, second=0, microsecond=0)
        total[start] += 1
        need[start] += bool(is_need(tw))
    first = min(tw.timestamp for tw in tweets).date()
    last = max(tw.timestamp for tw in tweets).date()
    rows = []
    day = datetime(first.year, first.month, first.day, tzinfo=timezone.utc)
    while day.date() <= last:
        for k in range(24 // block_width):
            s = day + timedelta(hours=k * block_width)
            rows.append((s.strftime("%Y-%m-%dT%H:%M:%SZ"), total[s], need[s]))
        day += timedelta(days=1)
    return rows


def city_counts(hourly) -> dict:
    out: dict = defaultdict(Counter)
    for h in hourly:
        out[h.block.location].update(h.counts)
    return {c: dict(cnt) for c, cnt in sorted(out.items())}


@dataclass
class CoocNetwork:
    edges: dict  # (a, b) with a < b -> number of blocks containing both
    presence: dict  # need -> number of blocks containing it
    n_blocks: int
    threshold: int = 0

    def count(self, a, b) -> int:
        return self.edges.get((a, b) if a < b else (b, a), 0)

    def exported(self):
        return [(a, b, n) for (a, b), n in sorted(self.edges.items()) if n >= self.threshold]

    def table(self, a, b) -> tuple[int, int, int, int]:
        """2x2 block presence table ``(n11, n10, n01, n00)`` for needs a, b."""
        n11 = self.count(a, b)
        n10 = self.presence.get(a, 0) - n11
        n01 = self.presence.get(b, 0) - n11
        return n11, n10, n01, self.n_blocks - n11 - n10 - n01


def cooccurrence(hourly, threshold: int = 0) -> CoocNetwork:
    """Needs co-occurring inside the same hour block."""
    return cooccurrence_sets((h.needs for h in hourly), threshold)


def cooccurrence_sets(units, threshold: int = 0) -> CoocNetwork:
    """Co-occurrence over arbitrary units (blocks, tweets), each a need collection."""
    edges: Counter = Counter()
    presence: Counter = Counter()
    n = 0
    for unit in units:
        n += 1
        needs = sorted(set(unit))
        presence.update(needs)
        edges.update(combinations(needs, 2))
    return CoocNetwork(dict(edges), dict(presence), n, threshold)


def phi(n11: int, n10: int, n01: int, n00: int) -> float:
    """Phi coefficient of a 2x2 table; 0 when any margin is empty."""
    den = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
    if den == 0:
        return 0.0
    return (n11 * n00 - n10 * n01) / math.sqrt(den)


def phi_rows(net: CoocNetwork):
    needs = sorted(net.presence)
    return [(a, b, f"{phi(*net.table(a, b)):.6f}") for a, b in combinations(needs, 2)]


def write_analytics(
    out_dir, hourly, tweets=None, is_need=None, block_width: int = 4, threshold: int = 0, units=None
) -> list[Path]:
    """Write concern_flow, city_counts, cooc_edges, phi and (given tweets) tweet_rate CSVs.

    Co-occurrence and phi use hour blocks unless *units* supplies other need sets.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hourly = list(hourly)
    files = []
    flow = concern_flow(hourly)
    files.append(out / "concern_flow.csv")
    write_csv_rows(files[-1], ("date", "need", "count"), [(d.isoformat(), n, c) for d, rows in flow.items() for n, c in rows])
    files.append(out / "city_counts.csv")
    write_csv_rows(
        files[-1],
        ("city", "need", "count"),
        [(city, n, c) for city, cnt in city_counts(hourly).items() for n, c in sorted(cnt.items(), key=lambda kv: (-kv[1], kv[0]))],
    )
    net = cooccurrence(hourly, threshold) if units is None else cooccurrence_sets(units, threshold)
    files.append(out / "cooc_edges.csv")
    write_csv_rows(files[-1], ("a", "b", "n"), net.exported())
    files.append(out / "phi.csv")
    write_csv_rows(files[-1], ("a", "b", "phi"), phi_rows(net))
    if tweets is not None:
        files.append(out / "tweet_rate.csv")
        write_csv_rows(files[-1], ("block_start", "total", "need_count"), tweet_rate(tweets, is_need, block_width))
    return files


__all__ = [
    "CORPUS_SIZE",
    "CoocNetwork",
    "SMCReport",
    "aggregate",
    "city_counts",
    "concern_flow",
    "cooccurrence",
    "cooccurrence_sets",
    "evaluate_pairs",
    "match_counts",
    "phi",
    "phi_rows",
    "smc",
    "tweet_rate",
    "write_analytics",
]
