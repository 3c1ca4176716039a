"""Raw tweet and weather records, file loaders, and hour-block alignment."""

from __future__ import annotations

import csv
import json
import warnings
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .errors import (
    AlignmentError,
    DroppedBlockWarning,
    FormatError,
    MalformedRecordWarning,
    RowError,
)

STORM_TYPES = ("TD", "TS", "HU", "PT")
WEATHER_HEADER = (
    "timestamp",
    "location",
    "wind_speed_mph",
    "pressure_mb",
    "storm_type",
    "category",
    "days_since_formed",
)
WEATHER_WINDOW = timedelta(hours=6)
MAX_MALFORMED_FRACTION = 0.10


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 string into an aware UTC datetime at second precision.

    Naive timestamps are taken to be UTC already.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Tweet:
    id: str
    timestamp: datetime
    text: str
    city: str | None = None
    hashtags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("tweet id must be nonempty")
        if not self.text:
            raise ValueError("tweet text must be nonempty")


@dataclass(frozen=True)
class WeatherObservation:
    timestamp: datetime
    location: str
    wind_speed: float
    pressure: float
    storm_type: str
    category: int
    days_since_formed: int

    def __post_init__(self):
        if not self.wind_speed >= 0:
            raise ValueError(f"wind speed must be >= 0, got {self.wind_speed}")
        if not self.pressure > 0:
            raise ValueError(f"pressure must be > 0, got {self.pressure}")
        if self.storm_type not in STORM_TYPES:
            raise ValueError(f"unknown storm type {self.storm_type!r}")
        if not 0 <= self.category <= 5:
            raise ValueError(f"category must be in [0, 5], got {self.category}")
        if self.days_since_formed < 0:
            raise ValueError("days_since_formed must be >= 0")


@dataclass(frozen=True, order=True)
class HourBlock:
    date: date
    hour: int
    location: str

    def __post_init__(self):
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour must be in [0, 23], got {self.hour}")

    @property
    def start(self) -> datetime:
        return datetime(self.date.year, self.date.month, self.date.day, self.hour, tzinfo=timezone.utc)

    @classmethod
    def containing(cls, ts: datetime, location: str) -> HourBlock:
        ts = ts.astimezone(timezone.utc)
        return cls(ts.date(), ts.hour, location)


@dataclass(frozen=True)
class AlignedRecord:
    block: HourBlock
    weather: WeatherObservation
    tweets: tuple[Tweet, ...] = field(default_factory=tuple)


def _normalize_location(name: str) -> str:
    return " ".join(name.strip().lower().split())


def parse_tweet(obj) -> Tweet:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("id", "created_at", "text"):
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
    if not isinstance(obj["text"], str):
        raise ValueError("text is not a string")
    city = obj.get("city")
    if city is not None:
        city = _normalize_location(str(city)) or None
    tags = tuple(str(h).lower().lstrip("#") for h in obj.get("hashtags") or ())
    return Tweet(str(obj["id"]), parse_timestamp(str(obj["created_at"])), obj["text"], city, tags)


def load_tweets(path) -> list[Tweet]:
    """Read a JSON-lines tweet file.

    Malformed lines are skipped with a :class:`MalformedRecordWarning`.  A single
    bad line is always tolerated; beyond that, more than 10% bad lines raises
    :class:`FormatError` naming the first offender.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    tweets: list[Tweet] = []
    bad: list[tuple[int, str]] = []
    seen: set[str] = set()
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            tweet = parse_tweet(json.loads(line))
            if tweet.id in seen:
                raise ValueError(f"duplicate id {tweet.id!r}")
        except (ValueError, TypeError) as exc:
            bad.append((lineno, str(exc)))
            continue
        seen.add(tweet.id)
        tweets.append(tweet)

    if bad:
        first_line, first_msg = bad[0]
        if len(bad) > 1 and len(bad) > MAX_MALFORMED_FRACTION * total:
            raise FormatError(
                f"{path}: {len(bad)} of {total} lines malformed; first bad line {first_line}: {first_msg}"
            )
        warnings.warn(
            MalformedRecordWarning(f"{path}: skipped {len(bad)} malformed line(s); first at line {first_line}: {first_msg}"),
            stacklevel=2,
        )
    return tweets


def load_weather(path) -> list[WeatherObservation]:
    """Read the weather CSV, sorted by timestamp then location.

    Duplicate (timestamp, location) rows keep the last occurrence.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise FormatError(f"{path}: empty weather file") from None
        if header != WEATHER_HEADER:
            missing = [c for c in WEATHER_HEADER if c not in header]
            detail = f"missing column(s) {', '.join(missing)}" if missing else "columns out of order"
            raise FormatError(f"{path}: bad header ({detail}); expected {','.join(WEATHER_HEADER)}")

        rows: dict[tuple[datetime, str], WeatherObservation] = {}
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(WEATHER_HEADER):
                raise RowError(lineno, f"expected {len(WEATHER_HEADER)} fields, got {len(row)}")
            ts_s, loc, wind_s, pres_s, stype, cat_s, days_s = (c.strip() for c in row)
            try:
                ts = parse_timestamp(ts_s)
            except ValueError:
                raise RowError(lineno, f"bad timestamp {ts_s!r}") from None
            try:
                wind = float(wind_s)
                pres = float(pres_s)
            except ValueError:
                raise RowError(lineno, f"non-numeric wind/pressure {wind_s!r}/{pres_s!r}") from None
            try:
                obs = WeatherObservation(ts, _normalize_location(loc), wind, pres, stype, int(cat_s), int(days_s))
            except ValueError as exc:
                raise RowError(lineno, str(exc)) from None
            key = (obs.timestamp, obs.location)
            if key in rows:
                warnings.warn(
                    MalformedRecordWarning(f"{path}:{lineno}: duplicate observation for {obs.location} at {ts_s}; last row wins"),
                    stacklevel=2,
                )
            rows[key] = obs
    return sorted(rows.values(), key=lambda o: (o.timestamp, o.location))


def _nearest(observations: list[WeatherObservation], times: list[datetime], target: datetime):
    i = bisect_left(times, target)
    best = None
    # candidates i-1 (earlier) and i (at/after); earlier wins ties
    for j in (i - 1, i):
        if 0 <= j < len(observations):
            d = abs(times[j] - target)
            if best is None or d < best[0]:
                best = (d, observations[j])
    return best


def align(tweets, weather, default_location: str | None = None) -> list[AlignedRecord]:
    """Group tweets into (location, hour) blocks and attach the nearest weather.

    Blocks whose nearest observation (same location) is more than six hours
    from the block start are dropped with a :class:`DroppedBlockWarning`.
    Output is sorted by block (date, hour, location).
    """
    if not tweets or not weather:
        raise AlignmentError("align needs at least one tweet and one weather observation")
    default = _normalize_location(default_location) if default_location else None

    by_loc: dict[str, list[WeatherObservation]] = defaultdict(list)
    for obs in sorted(weather, key=lambda o: (o.timestamp, o.location)):
        by_loc[obs.location].append(obs)
    loc_times = {loc: [o.timestamp for o in obs] for loc, obs in by_loc.items()}

    blocks: dict[HourBlock, list[Tweet]] = defaultdict(list)
    for tw in tweets:
        loc = tw.city or default
        if not loc:
            raise AlignmentError(f"tweet {tw.id} has no city and no default location is configured")
        blocks[HourBlock.containing(tw.timestamp, loc)].append(tw)

    records = []
    dropped = []
    for block in sorted(blocks):
        obs = by_loc.get(block.location)
        hit = _nearest(obs, loc_times[block.location], block.start) if obs else None
        if hit is None or hit[0] > WEATHER_WINDOW:
            dropped.append(block)
            continue
        members = tuple(sorted(blocks[block], key=lambda t: (t.timestamp, t.id)))
        records.append(AlignedRecord(block, hit[1], members))

    if not records:
        raise AlignmentError("no tweet block has weather within 6 hours; time ranges do not overlap")
    if dropped:
        sample = ", ".join(f"{b.location} {b.date} {b.hour:02d}h" for b in dropped[:3])
        warnings.warn(
            DroppedBlockWarning(f"dropped {len(dropped)} block(s) without weather within 6h: {sample}"),
            stacklevel=2,
        )
    return records
