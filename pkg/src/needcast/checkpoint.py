"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    b"NCST"  u16 version  str tag
    u32 n_symbols  { str symbol  u8 is_need } * n_symbols
    str metadata (JSON, sorted keys)
    u32 n_tensors  { str name  u8 dtype('f'|'i')  u8 ndim  u64*ndim shape  raw 8-byte data } * n_tensors

where ``str`` is a u32 byte length followed by UTF-8 bytes.  Tensor data is
row-major float64 or int64.  Writing the same model twice gives identical bytes.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .baselines import ConvClassifier, GenerativeLSTM, TrigramForecaster
from .encoding import RESERVED, SymbolVocabulary
from .errors import CheckpointError
from .fileio import atomic_write_bytes
from .forecaster import Seq2SeqForecaster

MAGIC = b"NCST"
VERSION = 1
MODEL_TYPES = {
    "seq2seq": Seq2SeqForecaster,
    "trigram": TrigramForecaster,
    "genlstm": GenerativeLSTM,
    "cnn": ConvClassifier,
}
_DTYPES = {"f": np.dtype("<f8"), "i": np.dtype("<i8")}


def _put_str(buf, s: str):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(model) -> bytes:
    tag = model.model_type
    if tag not in MODEL_TYPES:
        raise CheckpointError(f"unknown model type {tag!r}")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    _put_str(buf, tag)

    vocab = model.vocab
    buf.write(struct.pack("<I", vocab.size))
    for sym in vocab.index_to_symbol:
        _put_str(buf, sym)
        buf.write(struct.pack("<B", sym in vocab.needs))

    meta = {**_jsonable(model.meta), **_jsonable(model.state_meta())}
    _put_str(buf, json.dumps(meta, sort_keys=True, separators=(",", ":"), allow_nan=True))

    tensors = model.tensors()
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        kind = "i" if np.issubdtype(arr.dtype, np.integer) else "f"
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[kind])
        _put_str(buf, name)
        buf.write(kind.encode("ascii"))
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(data: bytes):
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    tag = r.string()
    if tag not in MODEL_TYPES:
        raise CheckpointError(f"unknown model type tag {tag!r}")

    (n_sym,) = r.unpack("<I")
    symbols, needs = [], []
    for _ in range(n_sym):
        s = r.string()
        (flag,) = r.unpack("<B")
        symbols.append(s)
        if flag:
            needs.append(s)
    if tuple(symbols[: len(RESERVED)]) != RESERVED:
        raise CheckpointError("vocabulary table does not start with the reserved symbols")
    vocab = SymbolVocabulary(symbols[len(RESERVED) :], needs)

    meta = json.loads(r.string())
    (n_t,) = r.unpack("<I")
    tensors = {}
    for _ in range(n_t):
        name = r.string()
        kind = r.take(1).decode("ascii")
        if kind not in _DTYPES:
            raise CheckpointError(f"tensor {name!r} has unknown dtype code {kind!r}")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q")
        count = int(np.prod(shape, dtype=np.int64))
        raw = r.take(count * 8)
        tensors[name] = np.frombuffer(raw, dtype=_DTYPES[kind]).reshape(shape).copy()
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    try:
        return MODEL_TYPES[tag].from_state(vocab, tensors, meta)
    except KeyError as exc:
        raise CheckpointError(f"checkpoint lacks entry {exc} for model type {tag!r}") from None


def save(model, path) -> None:
    atomic_write_bytes(path, dumps(model))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
