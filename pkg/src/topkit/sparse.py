"""Sparse scoring models over the vocabulary basis.

Covers BM25 and tf-idf document weighting, multi-hot query encoding,
document expansion, ingestion of externally learned term-weight vectors,
and global linear quantization of real weights to integer impacts. Every
encoder emits a SparseVector on the shared TermDictionary basis, so the
inner product of query and document vectors reproduces the familiar
term-at-a-time scoring rules exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .analysis import TermDictionary
from .errors import DataError
from .reprs import SparseVector


@dataclass(frozen=True)
class Bm25Params:
    """BM25 free parameters. Defaults follow the common Lucene settings."""

    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class CorpusStats:
    """Collection statistics needed by the frequency-based weighters."""

    n_docs: int
    avgdl: float
    df: dict[int, int]
    doc_len: dict[str, int]

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("corpus must contain at least one document")
        if not (self.avgdl > 0.0):
            raise ValueError("average document length must be positive")
        for tid, df in self.df.items():
            if not 1 <= df <= self.n_docs:
                raise ValueError(f"df for term {tid} is {df}, outside [1, {self.n_docs}]")


def compute_corpus_stats(
    corpus: Iterable[tuple[str, list[str]]], dictionary: TermDictionary
) -> CorpusStats:
    """One pass over (doc_id, tokens): interns terms, counts df and lengths.

    Zero-length documents are allowed; they simply contribute no postings.
    """
    df: dict[int, int] = {}
    doc_len: dict[str, int] = {}
    total_len = 0
    for doc_id, tokens in corpus:
        if doc_id in doc_len:
            raise DataError(f"duplicate doc id {doc_id!r} in corpus")
        doc_len[doc_id] = len(tokens)
        total_len += len(tokens)
        for tid in set(dictionary.intern_all(tokens)):
            df[tid] = df.get(tid, 0) + 1
    n_docs = len(doc_len)
    if n_docs == 0:
        raise DataError("corpus is empty")
    if total_len == 0:
        raise DataError("corpus has no tokens; average document length undefined")
    return CorpusStats(n_docs=n_docs, avgdl=total_len / n_docs, df=df, doc_len=doc_len)


def bm25_idf(df: int, n_docs: int) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every df <= N."""
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_encode_document(
    tokens: list[str],
    stats: CorpusStats,
    params: Bm25Params,
    dictionary: TermDictionary,
    query_time: bool = False,
) -> SparseVector:
    """BM25 weight per distinct term of the document.

    weight = idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

    At index time every term must be known to the stats (they were computed
    over the same corpus); at query time (query_time=True) out-of-dictionary
    tokens are dropped and in-dictionary terms unseen in the stats take
    df = 0.
    """
    dl = len(tokens)
    tf: dict[int, int] = {}
    for tok in tokens:
        tid = dictionary.lookup(tok)
        if tid is None:
            if query_time:
                continue
            raise DataError(f"token {tok!r} is not in the dictionary; recompute stats")
        tf[tid] = tf.get(tid, 0) + 1
    norm = params.k1 * (1.0 - params.b + params.b * dl / stats.avgdl)
    entries = {}
    for tid, freq in tf.items():
        df = stats.df.get(tid)
        if df is None:
            if not query_time:
                raise DataError(
                    f"term {dictionary.term(tid)!r} has no document frequency; "
                    "stats were computed over a different corpus"
                )
            df = 0
        idf = bm25_idf(df, stats.n_docs)
        entries[tid] = idf * freq * (params.k1 + 1.0) / (freq + norm)
    return SparseVector(entries)


def tfidf_encode_document(
    tokens: list[str], stats: CorpusStats, dictionary: TermDictionary
) -> SparseVector:
    """tf * ln(N / df) per distinct term; terms in every document weigh zero."""
    tf: dict[int, int] = {}
    for tok in tokens:
        tid = dictionary.lookup(tok)
        if tid is None:
            raise DataError(f"token {tok!r} is not in the dictionary; recompute stats")
        tf[tid] = tf.get(tid, 0) + 1
    entries = {}
    for tid, freq in tf.items():
        df = stats.df.get(tid)
        if df is None:
            raise DataError(
                f"term {dictionary.term(tid)!r} has no document frequency; "
                "stats were computed over a different corpus"
            )
        entries[tid] = freq * math.log(stats.n_docs / df)
    return SparseVector(entries)


def multi_hot_encode_query(tokens: list[str], dictionary: TermDictionary) -> SparseVector:
    """Weight 1.0 for each distinct in-vocabulary token; OOV tokens dropped."""
    entries = {}
    for tok in tokens:
        tid = dictionary.lookup(tok)
        if tid is not None:
            entries[tid] = 1.0
    return SparseVector(entries)


def apply_expansion(tokens: list[str], expansion_terms: list[str]) -> list[str]:
    """Append expansion terms the document does not already contain.

    Each appended term appears once (tf = 1 candidates); duplicates within
    the expansion list collapse. Original token order is preserved.
    """
    seen = set(tokens)
    out = list(tokens)
    for term in expansion_terms:
        if term not in seen:
            out.append(term)
            seen.add(term)
    return out


class ImpactVector:
    """Sparse vector with small positive integer weights (impacts)."""

    __slots__ = ("term_ids", "impacts", "bits")

    def __init__(self, entries: dict[int, int] | Iterable[tuple[int, int]], bits: int):
        if not 1 <= bits <= 16:
            raise ValueError(f"bits must be in [1, 16], got {bits}")
        if isinstance(entries, dict):
            items = sorted(entries.items())
        else:
            items = sorted(entries)
        top = (1 << bits) - 1
        ids = []
        impacts = []
        last = -1
        for tid, imp in items:
            tid = int(tid)
            imp = int(imp)
            if tid == last:
                raise ValueError(f"duplicate term id {tid}")
            last = tid
            if not 1 <= imp <= top:
                raise ValueError(f"impact {imp} for term {tid} outside [1, {top}]")
            ids.append(tid)
            impacts.append(imp)
        self.term_ids = np.asarray(ids, dtype=np.int64)
        self.impacts = np.asarray(impacts, dtype=np.int64)
        self.term_ids.setflags(write=False)
        self.impacts.setflags(write=False)
        self.bits = bits

    def to_sparse(self) -> SparseVector:
        return SparseVector(zip(self.term_ids.tolist(), (float(i) for i in self.impacts.tolist())))

    def __len__(self) -> int:
        return int(self.term_ids.shape[0])

    def __iter__(self):
        return zip(self.term_ids.tolist(), self.impacts.tolist())


@dataclass(frozen=True)
class QuantizationMap:
    """Global linear map from real weights to integer impacts."""

    w_max: float
    bits: int

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1


def quantize_impacts(
    vectors: Iterable[tuple[str, SparseVector]], bits: int = 8
) -> tuple[list[tuple[str, ImpactVector]], QuantizationMap]:
    """Quantize positive real weights to integers on a global linear scale.

    impact = max(1, round(w / w_max * (2^bits - 1))), with w_max the global
    maximum weight, so every stored term stays in the index. Rounding is
    half-up.
    """
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    items = list(vectors)
    w_max = 0.0
    any_entry = False
    for doc_id, vec in items:
        for _, w in vec:
            any_entry = True
            if w <= 0.0:
                raise ValueError(
                    f"quantization needs positive weights; doc {doc_id!r} has {w}"
                )
            if w > w_max:
                w_max = w
    if not any_entry:
        raise ValueError("nothing to quantize: no weights in the collection")
    levels = (1 << bits) - 1
    out = []
    for doc_id, vec in items:
        entries = {}
        for tid, w in vec:
            scaled = w / w_max * levels
            entries[tid] = max(1, int(math.floor(scaled + 0.5)))
        out.append((doc_id, ImpactVector(entries, bits)))
    return out, QuantizationMap(w_max=w_max, bits=bits)


def _jsonl_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec


def read_corpus(path: str | Path) -> Iterator[tuple[str, str]]:
    """Stream a JSONL corpus of {"id": ..., "contents": ...} records."""
    for lineno, rec in _jsonl_records(path):
        if "id" not in rec or "contents" not in rec:
            raise DataError(f"{path}:{lineno}: record needs 'id' and 'contents'")
        doc_id = rec["id"]
        contents = rec["contents"]
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"{path}:{lineno}: 'id' must be a non-empty string")
        if not isinstance(contents, str):
            raise DataError(f"{path}:{lineno}: 'contents' must be a string")
        yield doc_id, contents


def read_expansions(path: str | Path) -> dict[str, list[str]]:
    """Read {"id": ..., "expansion": [...]} JSONL into an id -> terms map."""
    out: dict[str, list[str]] = {}
    for lineno, rec in _jsonl_records(path):
        if "id" not in rec or "expansion" not in rec:
            raise DataError(f"{path}:{lineno}: record needs 'id' and 'expansion'")
        doc_id = rec["id"]
        terms = rec["expansion"]
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"{path}:{lineno}: 'id' must be a non-empty string")
        if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
            raise DataError(f"{path}:{lineno}: 'expansion' must be a list of strings")
        if doc_id in out:
            raise DataError(f"{path}:{lineno}: duplicate expansion for doc {doc_id!r}")
        out[doc_id] = terms
    return out


def load_learned_sparse(
    path: str | Path, dictionary: TermDictionary
) -> list[tuple[str, SparseVector]]:
    """Load learned term-weight vectors: {"id": ..., "vector": {term: weight}}.

    Terms are interned through the shared dictionary so learned vectors and
    lexical queries live on the same basis. Weights must be positive finite
    reals.
    """
    out = []
    seen = set()
    for lineno, rec in _jsonl_records(path):
        if "id" not in rec or "vector" not in rec:
            raise DataError(f"{path}:{lineno}: record needs 'id' and 'vector'")
        doc_id = rec["id"]
        vec = rec["vector"]
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"{path}:{lineno}: 'id' must be a non-empty string")
        if doc_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        if not isinstance(vec, dict):
            raise DataError(f"{path}:{lineno}: 'vector' must be an object")
        entries = {}
        for term, weight in vec.items():
            if not isinstance(weight, (int, float)) or isinstance(weight, bool):
                raise DataError(f"{path}:{lineno}: weight for {term!r} must be a number")
            w = float(weight)
            if not math.isfinite(w) or w <= 0.0:
                raise DataError(
                    f"{path}:{lineno}: weight for {term!r} must be positive and finite"
                )
            entries[dictionary.intern(term)] = w
        out.append((doc_id, SparseVector(entries)))
    return out


def save_learned_sparse(
    path: str | Path,
    items: Iterable[tuple[str, SparseVector]],
    dictionary: TermDictionary,
) -> None:
    """Write learned vectors as JSONL, terms in ascending id order."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, vec in items:
            obj = {dictionary.term(tid): w for tid, w in vec}
            fh.write(json.dumps({"id": doc_id, "vector": obj}, ensure_ascii=False))
            fh.write("\n")
