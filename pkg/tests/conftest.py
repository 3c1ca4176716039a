import warnings
from datetime import date, datetime, timezone

import numpy as np
import pytest

from needcast.corpus import HourBlock, Tweet
from needcast.encoding import InputSequence, NeedSequence, TrainingPair, build_vocab
from needcast.synth import OracleSpec, generate

ACCEPTANCE_LINES: dict[int, str] = {}

DEMO_INPUT = ("houston", "08-26", "D9", "H15", "W20", "P0", "HU", "C3")
DEMO_NEEDS = ("power", "light", "clothes")


def record_acceptance(number: int, name: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


def make_tweet(tid, text, ts=None, city="houston"):
    return Tweet(tid, ts or utc(2017, 8, 26, 15, 5), text, city, ())


def oracle_pairs(n_blocks: int, seed: int = 0, noise: float = 0.0):
    return generate(OracleSpec.for_blocks(n_blocks, noise=noise, seed=seed)).truth


def demo_pair() -> TrainingPair:
    return TrainingPair(InputSequence(DEMO_INPUT), NeedSequence(DEMO_NEEDS), HourBlock(date(2017, 8, 26), 15, "houston"))


@pytest.fixture
def small_pairs():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return oracle_pairs(12, seed=3)


@pytest.fixture
def small_vocab(small_pairs):
    return build_vocab(small_pairs)


def randomize(params: dict, seed: int, scale: float = 0.5) -> None:
    """Replace every tensor with random values so no gradient is trivially zero."""
    rng = np.random.default_rng(seed)
    for k, v in params.items():
        v[...] = rng.uniform(-scale, scale, v.shape)
