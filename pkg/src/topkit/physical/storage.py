"""Index persistence: framed binary files with a body checksum.

Layout for both index kinds:

    magic (4 bytes) | version u32 | body length u64 | body | blake2b-64(body)

Everything is little-endian. A short file, wrong magic, bad version, or
checksum mismatch rejects the load; nothing is ever partially loaded.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..analysis import TermDictionary
from ..errors import DataError
from ..ioutil import write_atomic_bytes
from ..sparse import CorpusStats
from .hnsw import METRIC_COSINE, METRIC_INNER_PRODUCT, HnswIndex, HnswParams
from .inverted import InvertedIndex, _Postings

MAGIC_INVERTED = b"SIDX"
MAGIC_HNSW = b"HIDX"
VERSION = 1

_HEADER = struct.Struct("<IQ")


def _checksum(body: bytes) -> bytes:
    return hashlib.blake2b(body, digest_size=8).digest()


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v):
        self.buf += struct.pack("<B", v)

    def u32(self, v):
        self.buf += struct.pack("<I", v)

    def u64(self, v):
        self.buf += struct.pack("<Q", v)

    def i64(self, v):
        self.buf += struct.pack("<q", v)

    def f64(self, v):
        self.buf += struct.pack("<d", v)

    def blob(self, b: bytes):
        self.u64(len(b))
        self.buf += b

    def text(self, s: str):
        self.blob(s.encode("utf-8"))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def _unpack(self, fmt: str):
        try:
            out = struct.unpack_from(fmt, self.data, self.off)
        except struct.error as exc:
            raise DataError(f"truncated index body: {exc}") from exc
        self.off += struct.calcsize(fmt)
        return out[0]

    def u8(self):
        return self._unpack("<B")

    def u32(self):
        return self._unpack("<I")

    def u64(self):
        return self._unpack("<Q")

    def i64(self):
        return self._unpack("<q")

    def f64(self):
        return self._unpack("<d")

    def blob(self) -> bytes:
        n = self.u64()
        if self.off + n > len(self.data):
            raise DataError("truncated index body: blob overruns buffer")
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def done(self):
        if self.off != len(self.data):
            raise DataError(f"{len(self.data) - self.off} trailing bytes in index body")


def _frame(magic: bytes, body: bytes) -> bytes:
    return magic + _HEADER.pack(VERSION, len(body)) + body + _checksum(body)


def _read_frame(path: str | Path) -> tuple[bytes, bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + _HEADER.size + 8:
        raise DataError(f"{path}: file too short to be an index")
    magic = data[:4]
    if magic not in (MAGIC_INVERTED, MAGIC_HNSW):
        raise DataError(f"{path}: unrecognized magic {magic!r}")
    version, body_len = _HEADER.unpack_from(data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported index version {version}")
    start = 4 + _HEADER.size
    if len(data) != start + body_len + 8:
        raise DataError(
            f"{path}: truncated index file "
            f"(expected {start + body_len + 8} bytes, found {len(data)})"
        )
    body = data[start : start + body_len]
    if _checksum(body) != data[start + body_len :]:
        raise DataError(f"{path}: checksum mismatch; file is corrupt")
    return magic, body


def _inverted_body(index: InvertedIndex) -> bytes:
    w = _Writer()
    w.u8(index.weight_kind)
    w.u8(1 if index.all_positive else 0)
    w.u8(1 if index.stats is not None else 0)
    w.u64(len(index.dictionary))
    for term in index.dictionary.terms:
        w.text(term)
    w.u64(len(index.doc_ids))
    for doc_id in index.doc_ids:
        w.text(doc_id)
    if index.stats is not None:
        stats = index.stats
        w.u64(stats.n_docs)
        w.f64(stats.avgdl)
        w.u64(len(stats.df))
        for tid in sorted(stats.df):
            w.u64(tid)
            w.u64(stats.df[tid])
        w.u64(len(stats.doc_len))
        for doc_id in sorted(stats.doc_len):
            w.text(doc_id)
            w.u64(stats.doc_len[doc_id])
    postings = index._postings
    w.u64(len(postings))
    for tid in sorted(postings):
        p = postings[tid]
        w.u64(tid)
        w.u64(p.count)
        w.f64(p.max_weight)
        w.blob(p.ordinal_data)
        w.blob(p.weight_data)
    return bytes(w.buf)


def _inverted_from_body(body: bytes) -> InvertedIndex:
    r = _Reader(body)
    weight_kind = r.u8()
    all_positive = bool(r.u8())
    has_stats = r.u8()
    dictionary = TermDictionary()
    for _ in range(r.u64()):
        dictionary.intern(r.text())
    dictionary.freeze()
    doc_ids = [r.text() for _ in range(r.u64())]
    stats = None
    if has_stats:
        n_docs = r.u64()
        avgdl = r.f64()
        df = {}
        for _ in range(r.u64()):
            tid = r.u64()
            df[tid] = r.u64()
        doc_len = {}
        for _ in range(r.u64()):
            doc_id = r.text()
            doc_len[doc_id] = r.u64()
        stats = CorpusStats(n_docs=n_docs, avgdl=avgdl, df=df, doc_len=doc_len)
    postings = {}
    for _ in range(r.u64()):
        tid = r.u64()
        count = r.u64()
        max_weight = r.f64()
        ordinal_data = r.blob()
        weight_data = r.blob()
        postings[tid] = _Postings(count, max_weight, ordinal_data, weight_data)
    r.done()
    return InvertedIndex(dictionary, doc_ids, postings, weight_kind, stats, all_positive)


_METRIC_CODE = {METRIC_INNER_PRODUCT: 0, METRIC_COSINE: 1}
_METRIC_NAME = {v: k for k, v in _METRIC_CODE.items()}


def _hnsw_body(index: HnswIndex) -> bytes:
    w = _Writer()
    w.u32(index.params.m)
    w.u32(index.params.ef_construction)
    w.u8(_METRIC_CODE[index.params.metric])
    w.u64(index.seed)
    n, dim = index.matrix.shape
    w.u32(dim)
    w.u64(n)
    for doc_id in index.doc_ids:
        w.text(doc_id)
    w.buf += np.ascontiguousarray(index.matrix, dtype="<f8").tobytes()
    for level in index.levels:
        w.u32(level)
    w.i64(index.entry_point)
    w.u32(index.max_level)
    for per_node in index.neighbors:
        for lst in per_node:
            w.u32(len(lst))
            for v in lst:
                w.u32(v)
    return bytes(w.buf)


def _hnsw_from_body(body: bytes) -> HnswIndex:
    r = _Reader(body)
    m = r.u32()
    efc = r.u32()
    metric_code = r.u8()
    if metric_code not in _METRIC_NAME:
        raise DataError(f"unknown metric code {metric_code}")
    seed = r.u64()
    dim = r.u32()
    n = r.u64()
    doc_ids = [r.text() for _ in range(n)]
    want = n * dim * 8
    if r.off + want > len(r.data):
        raise DataError("truncated index body: vector matrix overruns buffer")
    matrix = np.frombuffer(r.data, dtype="<f8", count=n * dim, offset=r.off)
    matrix = matrix.reshape(n, dim).copy()
    r.off += want
    levels = [r.u32() for _ in range(n)]
    entry_point = r.i64()
    max_level = r.u32()
    neighbors = []
    for node in range(n):
        per_node = []
        for _ in range(levels[node] + 1):
            cnt = r.u32()
            per_node.append([r.u32() for _ in range(cnt)])
        neighbors.append(per_node)
    r.done()
    params = HnswParams(m=m, ef_construction=efc, metric=_METRIC_NAME[metric_code])
    return HnswIndex(
        doc_ids=doc_ids,
        matrix=matrix,
        params=params,
        seed=seed,
        levels=levels,
        neighbors=neighbors,
        entry_point=entry_point,
        max_level=max_level,
    )


def persist_index(index: InvertedIndex | HnswIndex, path: str | Path) -> None:
    """Serialize an index atomically; the format is chosen by its type."""
    if isinstance(index, InvertedIndex):
        data = _frame(MAGIC_INVERTED, _inverted_body(index))
    elif isinstance(index, HnswIndex):
        data = _frame(MAGIC_HNSW, _hnsw_body(index))
    else:
        raise ValueError(f"cannot persist a {type(index).__name__}")
    write_atomic_bytes(path, data)


def load_index(path: str | Path) -> InvertedIndex | HnswIndex:
    magic, body = _read_frame(path)
    if magic == MAGIC_INVERTED:
        return _inverted_from_body(body)
    return _hnsw_from_body(body)
