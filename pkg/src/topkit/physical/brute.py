"""Exact brute-force retrieval: the ground-truth backend.

Scores every stored document against the query in double precision, so its
output defines correctness for the other backends. Sparse scoring
accumulates contributions in ascending term-id order, the same order the
inverted index uses, so the two agree bit-for-bit on identical inputs.
"""
from __future__ import annotations

import heapq
from typing import Iterable

import numpy as np

from ..dense import DenseStore
from ..reprs import (
    Comparison,
    DenseVector,
    MultiVector,
    RankedList,
    SparseVector,
    TopK,
    max_sim,
)
from .budget import SearchBudget


class BruteForceIndex:
    """Flat store over one representation kind with a bound comparison."""

    def __init__(self, kind: str, comparison: Comparison):
        self.kind = kind
        self.comparison = comparison

    @classmethod
    def from_sparse(
        cls, items: Iterable[tuple[str, SparseVector]]
    ) -> "BruteForceIndex":
        """Sparse collection scored by the inner product."""
        index = cls("sparse", Comparison.INNER_PRODUCT)
        docs: list[tuple[str, dict[int, float]]] = []
        seen = set()
        for doc_id, vec in items:
            if doc_id in seen:
                raise ValueError(f"duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            docs.append((doc_id, vec.lookup()))
        index._docs = docs
        return index

    @classmethod
    def from_dense(
        cls, store: DenseStore, comparison: Comparison = Comparison.INNER_PRODUCT
    ) -> "BruteForceIndex":
        if comparison not in (Comparison.INNER_PRODUCT, Comparison.COSINE):
            raise ValueError(f"dense brute force cannot execute {comparison.value}")
        index = cls("dense", comparison)
        index._store = store
        if comparison is Comparison.COSINE:
            norms = np.linalg.norm(store.matrix, axis=1)
            if np.any(norms == 0.0):
                raise ValueError("cosine comparison cannot index a zero vector")
            index._scoring_matrix = store.matrix / norms[:, None]
        else:
            index._scoring_matrix = store.matrix
        return index

    @classmethod
    def from_multi(cls, items: Iterable[tuple[str, MultiVector]]) -> "BruteForceIndex":
        """Per-token vector collection scored by max_sim."""
        index = cls("multi", Comparison.MAX_SIM)
        docs = []
        seen = set()
        for doc_id, mv in items:
            if doc_id in seen:
                raise ValueError(f"duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            docs.append((doc_id, mv))
        index._docs = docs
        return index

    @property
    def doc_count(self) -> int:
        if self.kind == "dense":
            return len(self._store)
        return len(self._docs)

    def search(self, query_id: str, q, budget: SearchBudget) -> RankedList:
        if self.kind == "sparse":
            if not isinstance(q, SparseVector):
                raise ValueError("sparse brute force needs a SparseVector query")
            return self._search_sparse(query_id, q, budget.k)
        if self.kind == "dense":
            if not isinstance(q, DenseVector):
                raise ValueError("dense brute force needs a DenseVector query")
            return self._search_dense(query_id, q, budget.k)
        if not isinstance(q, MultiVector):
            raise ValueError("max_sim brute force needs a MultiVector query")
        return self._search_multi(query_id, q, budget.k)

    def _search_sparse(self, query_id: str, q: SparseVector, k: int) -> RankedList:
        pairs = list(zip(q.term_ids.tolist(), q.weights.tolist()))
        top = TopK(k)
        for doc_id, dd in self._docs:
            get = dd.get
            s = 0.0
            for tid, qw in pairs:
                dw = get(tid)
                if dw is not None:
                    s += qw * dw
            top.push(doc_id, s)
        return top.ranked(query_id)

    def _search_dense(self, query_id: str, q: DenseVector, k: int) -> RankedList:
        if q.dim != self._store.dim:
            raise ValueError(f"dimensionality mismatch: {q.dim} vs {self._store.dim}")
        qv = q.values
        if self.comparison is Comparison.COSINE:
            norm = float(np.linalg.norm(qv))
            if norm == 0.0:
                raise ValueError("cosine is undefined for a zero-norm query")
            qv = qv / norm
        scores = self._scoring_matrix @ qv
        ids = self._store.ids
        n = len(ids)
        order = heapq.nsmallest(min(k, n), range(n), key=lambda i: (-scores[i], ids[i]))
        top = TopK(k)
        for i in order:
            top.push(ids[i], float(scores[i]))
        return top.ranked(query_id)

    def _search_multi(self, query_id: str, q: MultiVector, k: int) -> RankedList:
        top = TopK(k)
        for doc_id, mv in self._docs:
            top.push(doc_id, max_sim(q, mv))
        return top.ranked(query_id)

    def size_bytes(self) -> int:
        """Approximate in-memory footprint of the stored representations."""
        if self.kind == "dense":
            return int(self._store.matrix.nbytes) + sum(
                len(i.encode()) for i in self._store.ids
            )
        if self.kind == "sparse":
            return sum(16 * len(dd) + len(doc_id.encode()) for doc_id, dd in self._docs)
        return sum(int(mv.rows.nbytes) + len(doc_id.encode()) for doc_id, mv in self._docs)
