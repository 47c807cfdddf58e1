"""Dense vector stores, file formats, and the bag-of-embeddings encoder.

Vectors are held in one contiguous float64 matrix per store so backends
can score whole batches at once. Two interchange formats are supported:
a JSONL text form ({"id": ..., "vector": [...]}) and a compact binary
form (magic "DVEC") that stores rows as little-endian float32.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import TermDictionary
from .errors import DataError
from .reprs import DenseVector

DVEC_MAGIC = b"DVEC"
DVEC_VERSION = 1


class DenseStore:
    """Ordered collection of equal-width dense vectors keyed by doc id."""

    def __init__(self, ids: list[str], matrix: np.ndarray):
        matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("store matrix must be 2-d")
        if len(ids) != matrix.shape[0]:
            raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} rows")
        if matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise ValueError("store must hold at least one vector with width >= 1")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("store has non-finite values")
        self.ids = list(ids)
        self.matrix = matrix
        self._row = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if len(self._row) != len(self.ids):
            raise DataError("duplicate doc id in dense store")

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, np.ndarray]]) -> "DenseStore":
        ids = []
        rows = []
        dim = None
        for doc_id, vec in items:
            arr = np.asarray(getattr(vec, "values", vec), dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"vector for {doc_id!r} is not 1-d")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DataError(
                    f"ragged store: doc {doc_id!r} has dim {arr.shape[0]}, expected {dim}"
                )
            ids.append(doc_id)
            rows.append(arr)
        if not rows:
            raise DataError("no vectors to store")
        return cls(ids, np.vstack(rows))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row

    def row(self, doc_id: str) -> np.ndarray:
        i = self._row.get(doc_id)
        if i is None:
            raise KeyError(f"unknown doc id {doc_id!r}")
        return self.matrix[i]

    def get(self, doc_id: str) -> np.ndarray | None:
        i = self._row.get(doc_id)
        return None if i is None else self.matrix[i]

    def vector(self, doc_id: str) -> DenseVector:
        return DenseVector(self.row(doc_id))


def l2_normalize(v: DenseVector) -> DenseVector:
    """Scale to unit Euclidean norm; zero vectors cannot be normalized."""
    norm = float(np.linalg.norm(v.values))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero-norm vector")
    return DenseVector(v.values / norm)


def load_dense_jsonl(path: str | Path, expected_dim: int | None = None) -> DenseStore:
    """Read {"id": ..., "vector": [...]} JSONL into a store."""
    ids = []
    rows = []
    dim = expected_dim
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "id" not in rec or "vector" not in rec:
                raise DataError(f"{path}:{lineno}: record needs 'id' and 'vector'")
            doc_id = rec["id"]
            vec = rec["vector"]
            if not isinstance(doc_id, str) or not doc_id:
                raise DataError(f"{path}:{lineno}: 'id' must be a non-empty string")
            if not isinstance(vec, list) or not vec:
                raise DataError(f"{path}:{lineno}: 'vector' must be a non-empty list")
            try:
                arr = np.asarray(vec, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: vector is not numeric") from exc
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise DataError(f"{path}:{lineno}: vector must be flat and finite")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DataError(
                    f"{path}:{lineno}: vector has dim {arr.shape[0]}, expected {dim}"
                )
            ids.append(doc_id)
            rows.append(arr)
    if not rows:
        raise DataError(f"{path}: no vectors found")
    try:
        return DenseStore(ids, np.vstack(rows))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_dense_jsonl(path: str | Path, store: DenseStore) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, row in zip(store.ids, store.matrix):
            fh.write(json.dumps({"id": doc_id, "vector": row.tolist()}))
            fh.write("\n")


def save_dense_binary(path: str | Path, store: DenseStore) -> None:
    """Write the DVEC format: header, length-prefixed ids, float32 rows."""
    with open(path, "wb") as fh:
        fh.write(DVEC_MAGIC)
        fh.write(struct.pack("<IQI", DVEC_VERSION, len(store), store.dim))
        for doc_id in store.ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(store.matrix.astype("<f4").tobytes(order="C"))


def load_dense_binary(path: str | Path) -> DenseStore:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != DVEC_MAGIC:
        raise DataError(f"{path}: not a DVEC file")
    try:
        version, rows, dim = struct.unpack_from("<IQI", data, 4)
    except struct.error as exc:
        raise DataError(f"{path}: truncated header") from exc
    if version != DVEC_VERSION:
        raise DataError(f"{path}: unsupported DVEC version {version}")
    off = 4 + struct.calcsize("<IQI")
    ids = []
    for _ in range(rows):
        if off + 4 > len(data):
            raise DataError(f"{path}: truncated id table")
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + n > len(data):
            raise DataError(f"{path}: truncated id table")
        ids.append(data[off : off + n].decode("utf-8"))
        off += n
    want = rows * dim * 4
    if len(data) - off != want:
        raise DataError(
            f"{path}: expected {want} bytes of vector data, found {len(data) - off}"
        )
    matrix = np.frombuffer(data, dtype="<f4", count=rows * dim, offset=off)
    matrix = matrix.astype(np.float64).reshape(rows, dim)
    try:
        return DenseStore(ids, matrix)
    except (DataError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc


@dataclass
class ToyEncoder:
    """Mean-pooled bag of token embeddings over a fixed dictionary.

    encode() averages the embedding rows of the in-vocabulary tokens, one
    contribution per occurrence. A text with no in-vocabulary tokens has no
    representation and raises.
    """

    dictionary: TermDictionary
    table: np.ndarray  # (vocab, dim) float64
    query_table: np.ndarray | None = None  # separate query-side table, if unshared

    def __post_init__(self):
        self.table = self._check(self.table)
        if self.query_table is not None:
            self.query_table = self._check(self.query_table)
            if self.query_table.shape != self.table.shape:
                raise ValueError("query and document tables must have the same shape")

    def _check(self, table: np.ndarray) -> np.ndarray:
        table = np.ascontiguousarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("embedding table must be 2-d")
        if table.shape[1] < 2:
            raise ValueError("embedding dim must be at least 2")
        if table.shape[0] != len(self.dictionary):
            raise ValueError(
                f"table has {table.shape[0]} rows for a "
                f"{len(self.dictionary)}-term dictionary"
            )
        if not np.all(np.isfinite(table)):
            raise ValueError("embedding table has non-finite entries")
        return table

    @property
    def dim(self) -> int:
        return int(self.table.shape[1])

    @property
    def shared(self) -> bool:
        return self.query_table is None

    def token_ids(self, tokens: list[str]) -> list[int]:
        ids = []
        for tok in tokens:
            tid = self.dictionary.lookup(tok)
            if tid is not None:
                ids.append(tid)
        return ids

    def encode(self, tokens: list[str]) -> DenseVector:
        ids = self.token_ids(tokens)
        if not ids:
            raise ValueError("no in-vocabulary tokens to encode")
        return DenseVector(self.table[ids].mean(axis=0))

    def encode_query(self, tokens: list[str]) -> DenseVector:
        """Like encode(), but through the query-side table when unshared."""
        if self.query_table is None:
            return self.encode(tokens)
        ids = self.token_ids(tokens)
        if not ids:
            raise ValueError("no in-vocabulary tokens to encode")
        return DenseVector(self.query_table[ids].mean(axis=0))

    def encode_multi(self, tokens: list[str]):
        """One unit-normalized row per in-vocabulary token occurrence."""
        from .reprs import MultiVector

        ids = self.token_ids(tokens)
        if not ids:
            raise ValueError("no in-vocabulary tokens to encode")
        rows = self.table[ids]
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero-norm embedding row cannot be used in a multi-vector")
        return MultiVector(rows)
