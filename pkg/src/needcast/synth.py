"""Synthetic oracle corpus: storm weather, need tweets driven by a rule table.

Each (location, hour) block gets one weather observation at the block start
and one need tweet naming the block's needs, plus some unrelated chatter.  The
needs come from a rule table keyed by (category, hour parity, location index);
with probability ``noise`` each need is swapped for a random other need.  The
noise-free rule needs are written as the ground-truth pairs file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .corpus import WEATHER_HEADER, HourBlock, WeatherObservation, format_timestamp
from .encoding import InputSequence, NeedSequence, TrainingPair, bin_pressure, bin_wind, write_pairs
from .extraction import NEED, NON_NEED, default_lexicon
from .fileio import atomic_write_text, write_csv_rows

DEFAULT_LOCATIONS = ("houston", "dallas", "austin", "beaumont")
CATEGORIES = range(6)
NEED_OPENERS = (
    "we need {}",
    "still need {} here",
    "please send {}",
    "urgent need for {}",
    "looking for {} asap",
    "anyone have {}",
)
CHATTER = (
    "what a sunny day at the beach",
    "coffee and a movie this weekend",
    "great game and music at the concert",
    "traffic is crazy this morning",
    "lovely sunset view from the park",
    "lunch then dinner party later",
    "awesome football game on the big screen",
    "nice breeze and clear sky this evening",
    "new photo from the festival",
)
MIN_RULE, MAX_RULE = 3, 6


@dataclass
class OracleSpec:
    """Parameters of a synthetic corpus.

    ``start``/``end`` bound the hours generated per location (end exclusive).
    """

    locations: tuple[str, ...] = DEFAULT_LOCATIONS
    start: datetime = datetime(2017, 8, 17, tzinfo=timezone.utc)
    end: datetime = datetime(2017, 8, 27, 10, tzinfo=timezone.utc)
    noise: float = 0.1
    seed: int = 0
    chatter_rate: float = 1.0
    needs: tuple[str, ...] = field(default_factory=lambda: tuple(default_lexicon().canonical_needs))

    def __post_init__(self):
        self.locations = tuple(" ".join(loc.lower().split()) for loc in self.locations)
        if not self.locations or len(set(self.locations)) != len(self.locations):
            raise ValueError("locations must be nonempty and distinct")
        if not 0 <= self.noise < 1:
            raise ValueError("noise rate must lie in [0, 1)")
        if self.end <= self.start:
            raise ValueError("end must come after start")
        if len(self.needs) < MAX_RULE + 1:
            raise ValueError(f"need list too short for rule sets of up to {MAX_RULE}")

    @classmethod
    def for_blocks(cls, n_blocks: int, locations=DEFAULT_LOCATIONS, start=None, **kw):
        """Oracle settings covering *n_blocks* blocks spread evenly over the locations."""
        hours = -(-n_blocks // len(locations))
        start = start or cls.start
        return cls(tuple(locations), start, start + timedelta(hours=hours), **kw)

    @property
    def hours(self) -> int:
        return int((self.end - self.start).total_seconds() // 3600)


def rule_table(spec: OracleSpec) -> dict[tuple[int, int, int], tuple[str, ...]]:
    """Total map (category, hour parity, location index) -> sorted need set."""
    rng = np.random.default_rng([spec.seed, 1])
    table = {}
    for cat in CATEGORIES:
        for parity in (0, 1):
            for li in range(len(spec.locations)):
                k = int(rng.integers(MIN_RULE, MAX_RULE + 1))
                pick = rng.choice(len(spec.needs), size=k, replace=False)
                table[(cat, parity, li)] = tuple(sorted(spec.needs[i] for i in pick))
    return table


def _category(wind: float) -> int:
    for cat, lo in ((5, 157), (4, 130), (3, 111), (2, 96), (1, 74)):
        if wind >= lo:
            return cat
    return 0


def _storm_type(wind: float, frac: float) -> str:
    if frac >= 0.9:
        return "PT"
    if wind >= 74:
        return "HU"
    if wind >= 39:
        return "TS"
    return "TD"


def weather_track(spec: OracleSpec) -> list[WeatherObservation]:
    """Hourly observations: intensity ramps up to mid-range then back down."""
    rng = np.random.default_rng([spec.seed, 2])
    n = spec.hours
    out = []
    for li, loc in enumerate(spec.locations):
        scale = 1.0 - 0.08 * li
        jitter = rng.normal(0.0, 3.0, n)
        for t in range(n):
            frac = t / max(n - 1, 1)
            tri = 1.0 - abs(2.0 * frac - 1.0)
            wind = max(0.0, round(25.0 + 150.0 * tri * scale + jitter[t], 1))
            pressure = round(1012.0 - 0.45 * max(wind - 25.0, 0.0), 1)
            ts = spec.start + timedelta(hours=t)
            out.append(
                WeatherObservation(ts, loc, wind, pressure, _storm_type(wind, frac), _category(wind), t // 24)
            )
    return out


def _join(needs) -> str:
    needs = list(needs)
    if len(needs) == 1:
        return needs[0]
    return ", ".join(needs[:-1]) + " and " + needs[-1]


@dataclass
class OracleCorpus:
    spec: OracleSpec
    rules: dict
    weather: list[WeatherObservation]
    tweets: list[dict]
    labeled: list[dict]
    truth: list[TrainingPair]
    emitted: dict  # HourBlock -> needs actually written in the need tweet
    substitutions: int = 0
    slots: int = 0


def generate(spec: OracleSpec) -> OracleCorpus:
    rules = rule_table(spec)
    weather = weather_track(spec)
    rng = np.random.default_rng([spec.seed, 3])
    need_index = {n: i for i, n in enumerate(spec.needs)}
    tweets, truth, emitted = [], [], {}
    subs = slots = 0
    loc_index = {loc: i for i, loc in enumerate(spec.locations)}
    for obs in sorted(weather, key=lambda o: (o.timestamp, loc_index[o.location])):
        li = loc_index[obs.location]
        block = HourBlock(obs.timestamp.date(), obs.timestamp.hour, obs.location)
        base = rules[(obs.category, block.hour % 2, li)]
        written = []
        for need in base:
            slots += 1
            if spec.noise and rng.random() < spec.noise:
                taken = set(base) | set(written)
                choices = [n for n in spec.needs if n not in taken]
                written.append(choices[int(rng.integers(len(choices)))])
                subs += 1
            else:
                written.append(need)
        order = rng.permutation(len(written))
        text = NEED_OPENERS[int(rng.integers(len(NEED_OPENERS)))].format(_join(written[i] for i in order))
        minute = int(rng.integers(60))
        items = [(minute, text)]
        n_chat = int(rng.poisson(spec.chatter_rate))
        for _ in range(n_chat):
            items.append((int(rng.integers(60)), CHATTER[int(rng.integers(len(CHATTER)))]))
        for minute, body in items:
            ts = obs.timestamp + timedelta(minutes=minute, seconds=int(rng.integers(60)))
            tweets.append({"id": "", "created_at": format_timestamp(ts), "text": body, "city": obs.location, "hashtags": ["harvey"]})
        inp = InputSequence(
            (
                obs.location,
                f"{block.date.month:02d}-{block.date.day:02d}",
                f"D{obs.days_since_formed}",
                f"H{block.hour}",
                bin_wind(obs.wind_speed),
                bin_pressure(obs.pressure),
                obs.storm_type,
                f"C{obs.category}",
            )
        )
        truth.append(TrainingPair(inp, NeedSequence(base), block))
        emitted[block] = tuple(sorted(written, key=need_index.get))
    tweets.sort(key=lambda t: t["created_at"])
    for i, t in enumerate(tweets):
        t["id"] = f"t{i:07d}"
    labeled = _labeled(spec, rng)
    truth.sort(key=lambda p: (p.block.date, p.block.hour, p.block.location))
    return OracleCorpus(spec, rules, weather, tweets, labeled, truth, emitted, subs, slots)


def _labeled(spec: OracleSpec, rng, n_each: int = 100) -> list[dict]:
    out = []
    t0 = spec.start
    for i in range(n_each):
        k = int(rng.integers(1, 5))
        picks = [spec.needs[j] for j in rng.choice(len(spec.needs), size=k, replace=False)]
        opener = NEED_OPENERS[int(rng.integers(len(NEED_OPENERS)))]
        out.append({"text": opener.format(_join(picks)), "label": NEED})
        out.append({"text": CHATTER[int(rng.integers(len(CHATTER)))], "label": NON_NEED})
    for i, rec in enumerate(out):
        rec.update(id=f"l{i:05d}", created_at=format_timestamp(t0 + timedelta(seconds=i)), city=None, hashtags=[])
    return [{k: r[k] for k in ("id", "created_at", "text", "city", "hashtags", "label")} for r in out]


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)


def write_corpus(corpus: OracleCorpus, out_dir) -> dict[str, Path]:
    """Write tweets.jsonl, weather.csv, labeled.jsonl, truth_pairs.csv and rules.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "tweets": out / "tweets.jsonl",
        "weather": out / "weather.csv",
        "labeled": out / "labeled.jsonl",
        "truth": out / "truth_pairs.csv",
        "rules": out / "rules.csv",
    }
    atomic_write_text(paths["tweets"], _jsonl(corpus.tweets))
    write_csv_rows(
        paths["weather"],
        WEATHER_HEADER,
        [
            (format_timestamp(o.timestamp), o.location, f"{o.wind_speed:.1f}", f"{o.pressure:.1f}", o.storm_type, o.category, o.days_since_formed)
            for o in corpus.weather
        ],
    )
    atomic_write_text(paths["labeled"], _jsonl(corpus.labeled))
    write_pairs(paths["truth"], corpus.truth)
    write_csv_rows(
        paths["rules"],
        ("category", "parity", "location", "needs"),
        [(c, p, corpus.spec.locations[li], " ".join(n)) for (c, p, li), n in sorted(corpus.rules.items())],
    )
    return paths


def substitution_rate(truth, extracted) -> float:
    """Fraction of ground-truth need slots missing from the extracted targets.

    Both arguments are lists of :class:`TrainingPair`; blocks are matched by key.
    """
    got = {p.block: set(p.target.needs) for p in extracted}
    slots = missed = 0
    for p in truth:
        have = got.get(p.block, set())
        for n in p.target.needs:
            slots += 1
            missed += n not in have
    return missed / slots if slots else 0.0
