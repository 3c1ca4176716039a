from datetime import date
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_tweet, utc
from needcast.corpus import AlignedRecord, HourBlock, WeatherObservation
from needcast.encoding import (
    EOS,
    SOS,
    UNK,
    InputSequence,
    NeedSequence,
    SymbolVocabulary,
    TrainingPair,
    bin_pressure,
    bin_wind,
    build_input,
    build_target,
    build_vocab,
    one_hot,
    pairs_to_csv,
    read_pairs,
    write_pairs,
)
from needcast.errors import FormatError


@pytest.mark.parametrize(
    "speed, label", [(0, "W0"), (15, "W0"), (19.9, "W0"), (20, "W1"), (115, "W20"), (200, "W37"), (260, "W37")]
)
def test_bin_wind(speed, label):
    assert bin_wind(speed) == label


@pytest.mark.parametrize("p, label", [(900, "P0"), (950, "P0"), (950.9, "P0"), (953.2, "P3"), (1020, "P70"), (1050, "P70")])
def test_bin_pressure(p, label):
    assert bin_pressure(p) == label


def test_bin_rejects_invalid():
    with pytest.raises(ValueError):
        bin_wind(-1)
    with pytest.raises(ValueError):
        bin_pressure(0)


@given(st.floats(0, 400), st.floats(0, 400))
def test_wind_bins_monotone(a, b):
    lo, hi = sorted((a, b))
    assert int(bin_wind(lo)[1:]) <= int(bin_wind(hi)[1:])


def _record():
    block = HourBlock(date(2017, 8, 26), 15, "houston")
    w = WeatherObservation(utc(2017, 8, 26, 15), "houston", 115.0, 950.4, "HU", 3, 9)
    tweets = (
        make_tweet("b", "x", utc(2017, 8, 26, 15, 10)),
        make_tweet("a", "x", utc(2017, 8, 26, 15, 10)),
        make_tweet("c", "x", utc(2017, 8, 26, 15, 1)),
    )
    return AlignedRecord(block, w, tweets)


def test_build_input():
    assert build_input(_record()).symbols == ("houston", "08-26", "D9", "H15", "W20", "P0", "HU", "C3")


def test_build_target_orders_by_time_then_alpha():
    needs = {"a": ["water", "food"], "b": ["boat", "water"], "c": ["rescue"]}
    assert build_target(_record(), needs).needs == ("rescue", "food", "water", "boat")
    assert build_target(_record(), {}).empty


def test_sequence_invariants():
    with pytest.raises(ValueError):
        InputSequence(("a",) * 7)
    with pytest.raises(ValueError):
        NeedSequence(("water", "water"))
    with pytest.raises(ValueError):
        NeedSequence(tuple(f"n{i}" for i in range(41)))
    with pytest.raises(ValueError):
        TrainingPair(InputSequence(("dallas",) + ("x",) * 7), NeedSequence(()), HourBlock(date(2017, 1, 1), 0, "houston"))
    assert InputSequence.parse("a, b c d e f g h").symbols == tuple("abcdefgh")


def test_vocab_reserved_and_lookup(small_pairs):
    v = build_vocab(small_pairs)
    assert v.index_to_symbol[:3] == ["[SOS]", "[EOS]", "[UNK]"]
    assert (SOS, EOS, UNK) == (0, 1, 2)
    assert v.index("never-seen") == UNK
    first = small_pairs[0]
    assert v.decode(v.encode(first.input.symbols)) == list(first.input.symbols)
    mask = v.need_mask()
    assert not mask[:3].any()
    assert {v.symbol(i) for i in v.need_indices()} == {n for p in small_pairs for n in p.target.needs}
    assert sorted(v.symbol_to_index.values()) == list(range(v.size))


def test_vocab_empty_and_equality(small_pairs):
    with pytest.raises(ValueError):
        build_vocab([])
    assert build_vocab(small_pairs) == build_vocab(small_pairs)
    assert SymbolVocabulary(["x"], ["water"]) != SymbolVocabulary(["x", "water"])


def test_one_hot():
    v = one_hot(3, 5)
    assert v.tolist() == [0, 0, 0, 1, 0]
    with pytest.raises(IndexError):
        one_hot(5, 5)


def test_pairs_csv_round_trip(tmp_path, small_pairs):
    path = tmp_path / "pairs.csv"
    write_pairs(path, small_pairs)
    back = read_pairs(path)
    assert back == small_pairs
    assert pairs_to_csv(back) == path.read_text()


def test_read_pairs_errors(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("a,b\n")
    with pytest.raises(FormatError, match="header"):
        read_pairs(p)
    p.write_text("location,date,day,hour,wind_bin,pressure_bin,type,category,needs\nhouston,2017-08-26,D9\n")
    with pytest.raises(FormatError, match=":2"):
        read_pairs(p)


def test_fixture_pairs_parse():
    pairs = read_pairs(Path(__file__).parent / "fixtures/basic/expected/pairs.csv")
    assert [p.target.needs for p in pairs] == [("boat", "shelter", "water", "help", "trap"), ("battery", "flashlight", "power")]
    assert pairs[0].block == HourBlock(date(2017, 8, 26), 15, "houston")
