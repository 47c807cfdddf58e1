"""Core representation types and the comparison functions that score them.

Encoders produce one of three representations (sparse, dense, multi-vector)
and retrieval backends consume them only through the comparison functions
here, so any scoring model can run on any backend that supports its
comparison. Scores are ordinal: only the induced ranking is meaningful.

Ranking ties are broken everywhere by ascending doc_id (lexicographic), so
equal-score results are deterministic across backends and runs.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

import numpy as np


class SparseVector:
    """Immutable mapping of term ids to nonzero finite weights.

    Entries are stored sorted by term id. Zero weights are dropped at
    construction; duplicate term ids are an error.
    """

    __slots__ = ("term_ids", "weights", "_lookup")

    def __init__(self, entries: dict[int, float] | Iterable[tuple[int, float]] = ()):
        if isinstance(entries, dict):
            items = sorted(entries.items())
        else:
            items = sorted(entries)
        ids = []
        weights = []
        last = -1
        for tid, w in items:
            tid = int(tid)
            w = float(w)
            if tid < 0:
                raise ValueError(f"negative term id {tid}")
            if tid == last:
                raise ValueError(f"duplicate term id {tid}")
            last = tid
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight for term {tid}")
            if w == 0.0:
                continue
            ids.append(tid)
            weights.append(w)
        self.term_ids = np.asarray(ids, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.term_ids.setflags(write=False)
        self.weights.setflags(write=False)
        self._lookup: dict[int, float] | None = None

    def __len__(self) -> int:
        return int(self.term_ids.shape[0])

    def __iter__(self):
        return zip(self.term_ids.tolist(), self.weights.tolist())

    def get(self, term_id: int, default: float = 0.0) -> float:
        return self.lookup().get(term_id, default)

    def lookup(self) -> dict[int, float]:
        if self._lookup is None:
            self._lookup = dict(zip(self.term_ids.tolist(), self.weights.tolist()))
        return self._lookup

    def to_dict(self) -> dict[int, float]:
        return dict(self.lookup())

    def to_dense(self, dim: int) -> np.ndarray:
        """Materialize onto a fixed basis of size dim (term id = coordinate)."""
        if len(self) and int(self.term_ids[-1]) >= dim:
            raise ValueError(f"term id {int(self.term_ids[-1])} out of range for dim {dim}")
        out = np.zeros(dim, dtype=np.float64)
        out[self.term_ids] = self.weights
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.term_ids.shape == other.term_ids.shape
            and bool(np.all(self.term_ids == other.term_ids))
            and bool(np.all(self.weights == other.weights))
        )

    def __hash__(self):
        return hash((self.term_ids.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"SparseVector({self.to_dict()!r})"


class DenseVector:
    """Fixed-width vector of finite reals."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] == 0:
            raise ValueError("dense vector must be one-dimensional and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dense vector has non-finite values")
        arr.setflags(write=False)
        self.values = arr

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseVector):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"DenseVector(dim={self.dim})"


class MultiVector:
    """One vector per token, all the same width, rows unit-normalized.

    Used by the late-interaction comparison (max_sim). Rows are normalized
    at construction unless normalize=False, in which case they must already
    be unit length.
    """

    __slots__ = ("rows",)

    def __init__(self, rows, normalize: bool = True):
        arr = np.array(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("multi-vector needs a non-empty 2-d row matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("multi-vector has non-finite values")
        norms = np.linalg.norm(arr, axis=1)
        if normalize:
            if np.any(norms == 0.0):
                raise ValueError("zero-norm row cannot be normalized")
            arr = arr / norms[:, None]
        elif not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("rows are not unit-normalized")
        arr.setflags(write=False)
        self.rows = arr

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    def __repr__(self) -> str:
        return f"MultiVector(rows={self.n_rows}, dim={self.dim})"


@dataclass(frozen=True, slots=True)
class ScoredDoc:
    doc_id: str
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score for doc {self.doc_id!r}")


@dataclass(frozen=True)
class RankedList:
    """Search result: hits sorted by (score desc, doc_id asc), no duplicates."""

    query_id: str
    hits: tuple[ScoredDoc, ...]

    def __post_init__(self):
        object.__setattr__(self, "hits", tuple(self.hits))
        seen = set()
        prev = None
        for hit in self.hits:
            if hit.doc_id in seen:
                raise ValueError(f"duplicate doc id {hit.doc_id!r} in ranked list")
            seen.add(hit.doc_id)
            if prev is not None:
                if hit.score > prev.score or (
                    hit.score == prev.score and hit.doc_id < prev.doc_id
                ):
                    raise ValueError("ranked list is not sorted by (score desc, doc_id asc)")
            prev = hit

    def doc_ids(self) -> list[str]:
        return [h.doc_id for h in self.hits]

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)


class Comparison(Enum):
    """How a query representation is scored against a document representation."""

    INNER_PRODUCT = "inner_product"
    COSINE = "cosine"
    MAX_SIM = "max_sim"


def inner_product_sparse(a: SparseVector, b: SparseVector) -> float:
    """Dot product over shared term ids.

    Contributions rounding-order: ascending shared term id, one sequential
    f64 accumulation. That makes the value bit-identical no matter which
    argument is iterated, so the function is exactly symmetric.
    """
    if len(a) > len(b):
        small, big = b, a
    else:
        small, big = a, b
    other = big.lookup()
    total = 0.0
    for tid, w in zip(small.term_ids.tolist(), small.weights.tolist()):
        bw = other.get(tid)
        if bw is not None:
            total += w * bw
    return total


def inner_product_dense(a: DenseVector, b: DenseVector) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimensionality mismatch: {a.dim} vs {b.dim}")
    return float(np.dot(a.values, b.values))


def cosine(a: DenseVector, b: DenseVector) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimensionality mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for a zero-norm vector")
    return float(np.dot(a.values, b.values) / (na * nb))


def max_sim(q: MultiVector, d: MultiVector) -> float:
    """Sum over query rows of the best dot product against any document row."""
    if q.dim != d.dim:
        raise ValueError(f"dimensionality mismatch: {q.dim} vs {d.dim}")
    sims = q.rows @ d.rows.T
    return float(np.sum(np.max(sims, axis=1)))


def compare(kind: Comparison, q, d) -> float:
    """Dispatch a comparison over matching representation types."""
    if kind is Comparison.INNER_PRODUCT:
        if isinstance(q, SparseVector) and isinstance(d, SparseVector):
            return inner_product_sparse(q, d)
        if isinstance(q, DenseVector) and isinstance(d, DenseVector):
            return inner_product_dense(q, d)
        raise ValueError(
            f"inner_product needs two sparse or two dense vectors, "
            f"got {type(q).__name__} and {type(d).__name__}"
        )
    if kind is Comparison.COSINE:
        if isinstance(q, DenseVector) and isinstance(d, DenseVector):
            return cosine(q, d)
        raise ValueError("cosine needs two dense vectors")
    if kind is Comparison.MAX_SIM:
        if isinstance(q, MultiVector) and isinstance(d, MultiVector):
            return max_sim(q, d)
        raise ValueError("max_sim needs two multi-vectors")
    raise ValueError(f"unknown comparison {kind!r}")


class _HeapEntry:
    """Heap node ordered so the *worst* (lowest score, then highest doc_id)
    result sits at the root of a min-heap."""

    __slots__ = ("score", "doc_id")

    def __init__(self, score: float, doc_id: str):
        self.score = score
        self.doc_id = doc_id

    def __lt__(self, other: "_HeapEntry") -> bool:
        if self.score != other.score:
            return self.score < other.score
        return self.doc_id > other.doc_id


class TopK:
    """Streaming top-k accumulator under (score desc, doc_id asc).

    Shared by every backend so tie handling is identical everywhere.
    """

    __slots__ = ("k", "_heap")

    def __init__(self, k: int):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self._heap: list[_HeapEntry] = []

    def push(self, doc_id: str, score: float) -> None:
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, _HeapEntry(score, doc_id))
        elif self._heap[0] < _HeapEntry(score, doc_id):
            heapq.heapreplace(self._heap, _HeapEntry(score, doc_id))

    def full(self) -> bool:
        return len(self._heap) >= self.k

    def threshold(self) -> float:
        """Score of the current kth result, or -inf while not full."""
        if len(self._heap) < self.k:
            return float("-inf")
        return self._heap[0].score

    def threshold_doc_id(self) -> str | None:
        if len(self._heap) < self.k:
            return None
        return self._heap[0].doc_id

    def ranked(self, query_id: str) -> RankedList:
        ordered = sorted(self._heap, key=lambda e: (-e.score, e.doc_id))
        return RankedList(query_id, tuple(ScoredDoc(e.doc_id, e.score) for e in ordered))


def top_k_select(query_id: str, scored: Iterable[ScoredDoc], k: int) -> RankedList:
    """Select the k best docs from a stream of scored candidates."""
    top = TopK(k)
    for sd in scored:
        top.push(sd.doc_id, sd.score)
    return top.ranked(query_id)


@dataclass(frozen=True)
class LogicalScoringModel:
    """A bound scoring model: query encoder, document encoder, comparison.

    Encoders take (id, text) and return a representation compatible with
    the comparison. The triple fully determines ranking semantics; which
    physical backend executes it is a separate choice.
    """

    name: str
    comparison: Comparison
    encode_query: Callable[[str, str], object]
    encode_document: Callable[[str, str], object]

    def score(self, query_id: str, query_text: str, doc_id: str, doc_text: str) -> float:
        return compare(
            self.comparison,
            self.encode_query(query_id, query_text),
            self.encode_document(doc_id, doc_text),
        )
