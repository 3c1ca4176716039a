import struct

import numpy as np
import pytest

from conftest import oracle_pairs
from needcast import checkpoint
from needcast.base import TrainConfig
from needcast.encoding import InputSequence, build_vocab
from needcast.errors import CheckpointError
from needcast.pipeline import make_model


@pytest.fixture(scope="module")
def trained():
    pairs = oracle_pairs(24, seed=4)
    vocab = build_vocab(pairs)
    cfg = TrainConfig(epochs=3, hidden=8, batch_size=8, seed=4)
    return pairs, {kind: make_model(kind, vocab, cfg).fit(pairs, cfg) for kind in ("seq2seq", "genlstm", "cnn", "trigram")}


def _random_inputs(pairs, n, seed):
    rng = np.random.default_rng(seed)
    slots = [sorted({p.input.symbols[k] for p in pairs}) for k in range(8)]
    return [InputSequence(tuple(s[int(rng.integers(len(s)))] for s in slots)) for _ in range(n)]


@pytest.mark.parametrize("kind", ["seq2seq", "genlstm", "cnn", "trigram"])
def test_round_trip_identical_predictions(trained, tmp_path, kind):
    pairs, models = trained
    model = models[kind]
    path = tmp_path / f"{kind}.ckpt"
    checkpoint.save(model, path)
    back = checkpoint.load(path)
    assert type(back) is type(model)
    assert back.vocab == model.vocab
    inputs = _random_inputs(pairs, 100, seed=1)
    assert back.predict_many(inputs) == model.predict_many(inputs)
    for name, arr in model.tensors().items():
        assert np.array_equal(back.tensors()[name], arr)
    # saving the reloaded model reproduces the same bytes
    assert checkpoint.dumps(back) == path.read_bytes()


def test_header_layout(trained):
    data = checkpoint.dumps(trained[1]["seq2seq"])
    assert data[:4] == b"NCST"
    assert struct.unpack("<H", data[4:6])[0] == checkpoint.VERSION
    (n,) = struct.unpack("<I", data[6:10])
    assert data[10 : 10 + n] == b"seq2seq"


def test_version_mismatch(trained):
    data = bytearray(checkpoint.dumps(trained[1]["trigram"]))
    data[4:6] = struct.pack("<H", checkpoint.VERSION + 1)
    with pytest.raises(CheckpointError, match="version"):
        checkpoint.loads(bytes(data))


@pytest.mark.parametrize(
    "mangle, needle",
    [
        (lambda d: b"XXXX" + d[4:], "magic"),
        (lambda d: d[:-3], "truncated"),
        (lambda d: d + b"\0", "trailing"),
        (lambda d: d[:6] + struct.pack("<I", 3) + b"rnn" + d[6 + 4 + 7 :], "unknown model type"),
    ],
)
def test_corrupt_files(trained, mangle, needle):
    data = checkpoint.dumps(trained[1]["seq2seq"])
    with pytest.raises(CheckpointError, match=needle):
        checkpoint.loads(mangle(data))


def test_save_is_atomic_on_failure(tmp_path, trained):
    path = tmp_path / "m.ckpt"
    checkpoint.save(trained[1]["cnn"], path)
    before = path.read_bytes()

    class Broken:
        model_type = "nope"

    with pytest.raises(CheckpointError):
        checkpoint.save(Broken(), path)
    assert path.read_bytes() == before
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]
