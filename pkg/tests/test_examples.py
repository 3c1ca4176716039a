"""Worked examples from the module contracts, one small check each."""

import math
import warnings
from datetime import date

import numpy as np
import pytest

from conftest import make_tweet, oracle_pairs, utc
from needcast.analytics import aggregate, concern_flow, cooccurrence_sets, phi, smc, tweet_rate
from needcast.base import TrainConfig
from needcast.baselines.cnn import ConvClassifier, conv_maxpool, top_k
from needcast.baselines.genlstm import GenerativeLSTM
from needcast.baselines.trigram import trigram_train
from needcast.corpus import AlignedRecord, HourBlock, WeatherObservation, align
from needcast.encoding import (
    InputSequence,
    NeedSequence,
    TrainingPair,
    bin_pressure,
    bin_wind,
    build_input,
    build_target,
    build_vocab,
    one_hot,
)
from needcast.errors import TrainingError
from needcast.extraction import (
    NEED,
    NON_NEED,
    LabeledTweet,
    NeedClassifier,
    RuleTagger,
    classify,
    default_lexicon,
    extract_terms,
    normalize,
    top40,
    train_classifier,
)
from needcast.forecaster import Seq2SeqForecaster
from needcast.synth import OracleSpec, generate
from needcast.neural import (
    LSTMState,
    Optimizer,
    cross_entropy,
    init_lstm,
    lstm_backward,
    lstm_forward,
    lstm_sequence,
    softmax,
)
from test_extraction import BLOCK
from test_neural import scalar_lstm_step


def _obs(h, m=0):
    return WeatherObservation(utc(2017, 8, 26, h, m), "houston", 100.0, 960.0, "HU", 2, 9)


# -- corpus -------------------------------------------------------------


def test_two_tweets_one_block_nearest_to_block_start():
    tweets = [make_tweet("a", "x", utc(2017, 8, 26, 10, 15)), make_tweet("b", "x", utc(2017, 8, 26, 10, 45))]
    recs = align(tweets, [_obs(10), _obs(11)])
    assert len(recs) == 1 and recs[0].weather.timestamp == utc(2017, 8, 26, 10)
    assert len(recs[0].tweets) == 2


# -- extraction ---------------------------------------------------------


@pytest.mark.parametrize(
    "text, terms", [("I need water at Main St", ["water"]), ("she got trapped", ["trapped"]), ("hurricane Harvey Houston", [])]
)
def test_extract_terms_examples(text, terms):
    assert extract_terms(make_tweet("a", text), RuleTagger(), default_lexicon()) == terms


def test_top40_examples():
    terms = [f"t{i:02d}" for i in range(40)] + ["zz"]
    h = top40(BLOCK, [terms, ["zz"]])
    assert h.needs[0] == "zz" and h.needs[1:] == tuple(terms[:39])
    assert set(top40(BLOCK, [list("abcde")]).needs) == set("abcde")
    assert top40(BLOCK, [["water", "food"]]).needs == ("food", "water")


def test_normalize_examples():
    lx = default_lexicon()
    assert normalize("donates", lx) == "donation"
    assert normalize("water", lx) == "water"
    assert normalize("xylophone", lx) is None and lx.review_queue == ["xylophone"]


def test_classifier_examples():
    model = NeedClassifier({"water": 0}, np.array([1.0, -0.5]))
    assert classify(model, make_tweet("a", "zebra")) == NON_NEED
    model.weights[-1] = 0.5
    assert classify(model, make_tweet("a", "zebra")) == NEED
    data = [LabeledTweet(make_tweet(f"n{i}", "need water help"), NEED) for i in range(20)]
    data += [LabeledTweet(make_tweet(f"o{i}", "nice sunny day"), NON_NEED) for i in range(20)]
    trained, _ = train_classifier(data)
    assert classify(trained, make_tweet("x", "need water help")) == NEED
    assert classify(trained, make_tweet("x", "nice sunny day")) == NON_NEED
    with pytest.raises(TrainingError):
        train_classifier(data[20:])


# -- encoding -----------------------------------------------------------


def test_bin_examples():
    assert [bin_wind(w) for w in (15, 115, 300)] == ["W0", "W20", "W37"]
    assert [bin_pressure(p) for p in (950, 1013, 947)] == ["P0", "P63", "P0"]


def test_demo_record_input():
    w = WeatherObservation(utc(2017, 8, 26, 15), "houston", 115.0, 950.0, "HU", 3, 9)
    rec = AlignedRecord(HourBlock(date(2017, 8, 26), 15, "houston"), w, ())
    assert build_input(rec).symbols == ("houston", "08-26", "D9", "H15", "W20", "P0", "HU", "C3")
    assert build_input(rec) == build_input(rec)


def test_target_examples():
    tweets = (make_tweet("a", "x", utc(2017, 8, 26, 10, 5)), make_tweet("b", "x", utc(2017, 8, 26, 10, 20)))
    rec = AlignedRecord(HourBlock(date(2017, 8, 26), 10, "houston"), _obs(10), tweets)
    assert build_target(rec, {"a": ["shelter", "boat"], "b": ["water"]}).needs == ("boat", "shelter", "water")
    assert build_target(rec, {"a": ["water"]}).needs == ("water",)
    assert build_target(rec, {"a": ["water"], "b": ["water"]}).needs == ("water",)


def test_vocab_size_example():
    # "loc" plus s0..s8 gives 10 input symbols; the needs add 5 more
    sym = [f"s{i}" for i in range(9)]
    day = date(2017, 1, 1)
    pairs = [
        TrainingPair(InputSequence(("loc", *sym[:7])), NeedSequence(("n0", "n1", "n2")), HourBlock(day, 0, "loc")),
        TrainingPair(InputSequence(("loc", *sym[7:], *sym[:5])), NeedSequence(("n3", "n4")), HourBlock(day, 1, "loc")),
    ]
    vocab = build_vocab(pairs)
    assert vocab.size == 18
    assert all(vocab.symbol(vocab.index(s)) == s for s in vocab.index_to_symbol)


def test_one_hot_examples():
    assert one_hot(3, 6).tolist() == [0, 0, 0, 1, 0, 0]
    assert one_hot(0, 1).tolist() == [1]
    with pytest.raises(IndexError):
        one_hot(6, 6)


# -- neural core --------------------------------------------------------


def _zero_cell(inp, hidden):
    return {k: np.zeros_like(v) for k, v in init_lstm(inp, hidden, np.random.default_rng(0)).items()}


def test_zero_cell_examples():
    st, cache = lstm_forward(_zero_cell(3, 2), np.array([1.0, -2.0, 3.0]), LSTMState.zeros(2))
    assert np.all(cache.i == 0.5) and np.all(cache.f == 0.5) and np.all(cache.o == 0.5)
    assert np.all(st.c == 0) and np.all(st.h == 0)
    st, _ = lstm_forward(_zero_cell(1, 1), np.array([0.7]), LSTMState(np.zeros(1), np.ones(1)))
    assert st.c[0] == 0.5
    assert st.h[0] == pytest.approx(0.5 * math.tanh(0.5), abs=1e-12)
    assert round(st.h[0], 6) == 0.231059


def test_seed42_hidden2_scalar_oracle():
    rng = np.random.default_rng(42)
    p = init_lstm(3, 2, rng)
    for k in ("W_ci", "W_cf", "W_co", "b_i", "b_f", "b_c", "b_o"):
        p[k] = rng.uniform(-0.5, 0.5, p[k].shape)
    x, h0, c0 = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
    st, _ = lstm_forward(p, x, LSTMState(h0, c0))
    h, c = scalar_lstm_step(p, x, h0, c0)
    np.testing.assert_allclose(st.h, h, atol=1e-12)
    np.testing.assert_allclose(st.c, c, atol=1e-12)


def test_zero_upstream_gradient():
    p = init_lstm(2, 3, np.random.default_rng(1))
    _, caches, _ = lstm_sequence(p, [np.ones(2)] * 4, LSTMState.zeros(3))
    grads, _, _, _ = lstm_backward(p, caches, [np.zeros(3)] * 4)
    assert all(not g.any() for g in grads.values())


def test_hand_differentiated_scalar_step():
    p = {k: np.full_like(v, w) for (k, v), w in zip(init_lstm(1, 1, np.random.default_rng(0)).items(), np.linspace(-0.6, 0.7, 15))}
    x, h0, c0 = np.array([0.9]), np.array([-0.3]), np.array([0.4])
    st, cache = lstm_forward(p, x, LSTMState(h0, c0))
    i, f, g, o, c = cache.i[0], cache.f[0], cache.g[0], cache.o[0], cache.c[0]
    tc = math.tanh(c)
    dh_dc = o * (1 - tc**2) + tc * o * (1 - o) * p["W_co"][0]  # o peeks at the new cell
    expect = {
        "b_o": tc * o * (1 - o),
        "W_co": tc * o * (1 - o) * c,
        "W_xc": dh_dc * i * (1 - g**2) * x[0],
        "b_f": dh_dc * c0[0] * f * (1 - f),
        "W_ci": dh_dc * g * i * (1 - i) * c0[0],
        "W_hi": dh_dc * g * i * (1 - i) * h0[0],
    }
    grads, _, _, _ = lstm_backward(p, [cache], [np.ones(1)])
    for k, v in expect.items():
        assert grads[k].ravel()[0] == pytest.approx(v, abs=1e-10), k


def test_memory_cell_probe():
    p = _zero_cell(1, 1)
    p["b_f"][:] = 10.0
    p["b_i"][:] = -10.0
    p["b_o"][:] = -10.0
    p["W_xc"][:] = 1.0
    state = LSTMState(np.zeros(1), np.ones(1))
    for _ in range(10):
        prev = state.c.copy()
        state, _ = lstm_forward(p, np.ones(1), state)
        assert abs(state.c[0] - prev[0]) < 0.1


def test_softmax_and_ce_examples():
    np.testing.assert_allclose(softmax(np.zeros(4)), [0.25] * 4)
    big = softmax(np.array([1000.0, 0.0]))
    assert big[0] == 1.0 and big[1] >= 0.0 and np.all(np.isfinite(big))
    np.testing.assert_allclose(softmax(np.array([math.log(2), 0.0])), [2 / 3, 1 / 3], rtol=1e-14)
    for V in (5, 75):
        assert cross_entropy(np.full(V, 1 / V), 0)[0] == pytest.approx(math.log(V))
    assert round(math.log(75), 4) == 4.3175
    assert cross_entropy(np.array([0.0, 1.0]), 1)[0] == 0.0


def test_optimizer_examples():
    params = {"a": np.array([2.0, -1.0])}
    Optimizer("sgd", lr=1.0, clip=0).step(params, {"a": np.array([0.5, 0.25])})
    assert params["a"].tolist() == [1.5, -1.25]
    Optimizer("sgd", lr=1.0).step(params, {"a": np.zeros(2)})
    assert params["a"].tolist() == [1.5, -1.25]

    def run():
        rng = np.random.default_rng(0)
        p = {"w": rng.normal(size=(3, 3))}
        opt = Optimizer("adam")
        for _ in range(100):
            opt.step(p, {"w": np.sin(p["w"]) + rng.normal(size=(3, 3))})
        return p["w"]

    assert np.array_equal(run(), run())


# -- forecaster ---------------------------------------------------------


def test_zero_model_encoder_and_attention(small_pairs, small_vocab):
    m = Seq2SeqForecaster(small_vocab, hidden=4, init_scale=0.0)
    O, state = m.encode(small_pairs[0].input)
    assert not O.any() and not state.h.any() and not state.c.any()
    seq, trace = m.predict_traced(small_pairs[0].input)
    np.testing.assert_allclose(trace.weights, 1 / 8)
    # all scores tie, so the lowest allowed index (EOS) wins at once
    assert seq == NeedSequence((), True) and trace.outputs == ("[EOS]",)
    assert m.predict(small_pairs[0].input) == seq


def test_trained_encoder_is_order_sensitive():
    pairs = oracle_pairs(16, seed=2)
    vocab = build_vocab(pairs)
    m = Seq2SeqForecaster(vocab, hidden=8, seed=1).fit(pairs, TrainConfig(epochs=5, hidden=8))
    s = list(pairs[0].input.symbols)
    _, a = m.encode(InputSequence(tuple(s)))
    s[4], s[5] = s[5], s[4]
    _, b = m.encode(InputSequence(tuple(s)))
    assert not np.allclose(a.h, b.h)


def test_overfit_reproduces_targets_and_scores_one():
    pairs = oracle_pairs(8, seed=6)
    vocab = build_vocab(pairs)
    m = Seq2SeqForecaster(vocab, hidden=64, seed=0).fit(pairs, TrainConfig(epochs=400, hidden=64, batch_size=8))
    preds = m.predict_many([p.input for p in pairs])
    assert [p.needs for p in preds] == [p.target.needs for p in pairs]
    from needcast.analytics import evaluate_pairs

    assert evaluate_pairs(pairs, preds).overall == 1.0
    for p in pairs[:2]:
        seq, trace = m.predict_traced(p.input)
        assert trace.weights.shape[0] == len(seq) + 1


# -- baselines ----------------------------------------------------------


def test_trigram_examples():
    m = trigram_train([["a", "b", "c", "."], ["a", "b", "d", "."]])
    assert m.V == 5
    assert m.prob("c", "a", "b") == pytest.approx(2 / 7) and m.prob("d", "a", "b") == pytest.approx(2 / 7)
    assert sum(m.distribution("a", "b").values()) == pytest.approx(1.0, abs=1e-12)
    one = trigram_train([["a", "b", "c", "."]])
    assert one.best("a", "b", one.tokens) == "c"
    m = trigram_train([["x", "y", "water", "."]])
    assert m.generate(["x", "y"], {"water"}) == (["water"], True)


def test_genlstm_examples(small_pairs, small_vocab):
    m = GenerativeLSTM(small_vocab, hidden=6, dropout=0.0)
    x, y, mask = m.batch_arrays(m.token_sequences(small_pairs[:3]))
    assert m.dropout_masks((*x.shape, 6), np.random.default_rng(0)) is None
    plain = m.loss_and_grads(x, y, mask)
    ones = m.loss_and_grads(x, y, mask, np.ones((*x.shape, 6)))
    assert plain[0] == ones[0]
    assert all(np.array_equal(plain[1][k], ones[1][k]) for k in plain[1])

    # one block per location, so the location token pins down the whole sequence
    spec = OracleSpec.for_blocks(10, locations=[f"city{i}" for i in range(10)], seed=4, noise=0.0)
    pairs = generate(spec).truth
    vocab = build_vocab(pairs)
    g = GenerativeLSTM(vocab, hidden=64, seed=0).fit(pairs, TrainConfig(epochs=300, hidden=64, batch_size=10, lr=1e-2))
    x, y, mask = g.batch_arrays(g.token_sequences(pairs))
    assert g.loss_and_grads(x, y, mask)[0] < 0.1
    inputs = [p.input for p in pairs]
    assert g.predict_many(inputs) == g.predict_many(inputs)


def test_cnn_examples():
    assert set(top_k(np.array([0.4, 0.3, 0.2, 0.1]), 2).tolist()) == {0, 1}
    X = np.ones((1, 8, 3))
    pooled, _ = conv_maxpool(X, np.zeros((2, 3, 3)), np.array([0.5, -0.5]))
    assert pooled.tolist() == [[0.5, 0.0]]
    blk = HourBlock(date(2017, 1, 1), 0, "loc")
    needs = [f"n{i}" for i in range(5)]
    pairs = [
        TrainingPair(InputSequence(("loc",) + (f"s{k}",) * 7), NeedSequence(tuple(needs[:n])), HourBlock(blk.date, k, "loc"))
        for k, n in enumerate((2, 5, 3))
    ]
    m = ConvClassifier(build_vocab(pairs), embed_dim=4, n_filters=2).fit(pairs, TrainConfig(epochs=1))
    assert m.k == 5


# -- analytics ----------------------------------------------------------


def test_smc_examples():
    needs = default_lexicon().canonical_needs
    assert smc({"water", "help"}, {"water", "help"}) == 1.0
    assert smc({"water", "help"}, {"water", "food"}) == 73 / 75
    assert smc(set(), set(needs)) == 0.0


def test_aggregation_examples():
    d = date(2017, 8, 26)
    counts = {HourBlock(d, 1, "x"): (8, 1, 1, 0), HourBlock(d, 2, "x"): (9, 0, 1, 0)}
    rep = aggregate(counts, corpus_size=10)
    assert rep.daily[d] == pytest.approx(0.85)
    single = aggregate({HourBlock(d, 1, "x"): (60, 0, 0, 0)})
    assert single.overall == 0.8


def _hourly(counts):
    from needcast.extraction import HourlyNeeds

    return HourlyNeeds(BLOCK, tuple(counts), dict(counts))


def test_flow_and_rate_examples():
    flow = concern_flow([_hourly({"a": 1, "b": 2, "c": 3})])
    assert {n for n, _ in flow[BLOCK.date]} == {"a", "b", "c"}
    flow = concern_flow([_hourly({f"n{i:02d}": 100 - i for i in range(25)})])
    assert "n24" not in {n for n, _ in flow[BLOCK.date]} and len(flow[BLOCK.date]) == 24
    assert len(tweet_rate([make_tweet("a", "x")], bool, block_width=4)) == 6


def test_phi_examples():
    net = cooccurrence_sets([{"a", "b"}, {"c"}, {"a", "b"}, set()], threshold=2)
    assert phi(*net.table("a", "b")) == 1.0
    assert phi(1, 1, 1, 1) == 0.0
    assert net.exported() == [("a", "b", 2)]
    big = cooccurrence_sets([{"a", "b"}] * 400 + [{"a", "c"}] * 399, threshold=400)
    assert big.exported() == [("a", "b", 400)]


# -- pipeline / CLI -----------------------------------------------------


def test_empty_tweet_file_is_an_error(tmp_path):
    from needcast import cli

    (tmp_path / "t.jsonl").write_text("")
    (tmp_path / "w.csv").write_text(
        "timestamp,location,wind_speed_mph,pressure_mb,storm_type,category,days_since_formed\n"
        "2017-08-26T15:00:00Z,houston,115,950,HU,3,9\n"
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code = cli.main(["extract", "--tweets", str(tmp_path / "t.jsonl"), "--weather", str(tmp_path / "w.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
