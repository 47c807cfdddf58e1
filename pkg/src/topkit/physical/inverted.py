"""Compressed inverted index with document-at-a-time search and MaxScore.

Postings keep doc ordinals delta-encoded as varints next to a parallel
weight stream: integer impacts as varints, real weights as little-endian
float32. Each term also records its maximum weight so MaxScore can bound
the score any unseen document could still reach.

Scoring matches brute force bit-for-bit: contributions of a document are
accumulated in ascending term-id order in double precision, and ties are
broken by ascending external doc id.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..analysis import TermDictionary
from ..errors import DataError
from ..reprs import RankedList, SparseVector, TopK
from ..sparse import CorpusStats, ImpactVector
from . import varint
from .budget import SearchBudget

WEIGHT_REAL = 0
WEIGHT_IMPACT = 1


@dataclass
class _Postings:
    count: int
    max_weight: float
    ordinal_data: bytes
    weight_data: bytes


@dataclass
class SearchCounters:
    """Work accounting for pruned vs exhaustive traversal."""

    postings_scored: int = 0


class InvertedIndex:
    """Term-partitioned index over positive-weight sparse vectors."""

    def __init__(
        self,
        dictionary: TermDictionary,
        doc_ids: list[str],
        postings: dict[int, _Postings],
        weight_kind: int,
        stats: CorpusStats | None = None,
        all_positive: bool = True,
    ):
        self.dictionary = dictionary
        self.doc_ids = doc_ids
        self._postings = postings
        self.weight_kind = weight_kind
        self.stats = stats
        self.all_positive = all_positive

    @classmethod
    def build(
        cls,
        vectors: Iterable[tuple[str, SparseVector | ImpactVector]],
        dictionary: TermDictionary,
        stats: CorpusStats | None = None,
    ) -> "InvertedIndex":
        doc_ids: list[str] = []
        seen: set[str] = set()
        acc: dict[int, tuple[list[int], list[float]]] = {}
        weight_kind = None
        all_positive = True
        for doc_id, vec in vectors:
            if doc_id in seen:
                raise DataError(f"duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            ordinal = len(doc_ids)
            doc_ids.append(doc_id)
            if isinstance(vec, ImpactVector):
                kind = WEIGHT_IMPACT
            elif isinstance(vec, SparseVector):
                kind = WEIGHT_REAL
                if len(vec) and float(vec.weights.min()) <= 0.0:
                    all_positive = False
            else:
                raise ValueError(f"cannot index a {type(vec).__name__}")
            if weight_kind is None:
                weight_kind = kind
            elif weight_kind != kind:
                raise ValueError("cannot mix impact and real-weight vectors in one index")
            for tid, w in vec:
                ords, ws = acc.setdefault(tid, ([], []))
                ords.append(ordinal)
                ws.append(float(w))
        if not doc_ids:
            raise DataError("cannot build an index with no documents")
        postings: dict[int, _Postings] = {}
        for tid, (ords, ws) in acc.items():
            ordinal_data = varint.encode_deltas(ords)
            if weight_kind == WEIGHT_IMPACT:
                weight_data = varint.encode_uints(int(w) for w in ws)
                max_weight = float(max(ws))
            else:
                arr = np.asarray(ws, dtype="<f4")
                weight_data = arr.tobytes()
                max_weight = float(arr.max())
            postings[tid] = _Postings(len(ords), max_weight, ordinal_data, weight_data)
        return cls(dictionary, doc_ids, postings, weight_kind or WEIGHT_REAL, stats, all_positive)

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @property
    def term_ids(self) -> list[int]:
        return sorted(self._postings)

    def df(self, term_id: int) -> int:
        p = self._postings.get(term_id)
        return p.count if p else 0

    def term_max_weight(self, term_id: int) -> float:
        p = self._postings.get(term_id)
        if p is None:
            raise KeyError(f"no postings for term id {term_id}")
        return p.max_weight

    def decode_postings(self, term_id: int) -> tuple[np.ndarray, np.ndarray]:
        """Decode one term's postings to (ordinals, weights) arrays."""
        p = self._postings.get(term_id)
        if p is None:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
        ords = varint.decode_deltas(p.ordinal_data, p.count)
        if self.weight_kind == WEIGHT_IMPACT:
            ws = np.asarray(varint.decode_uints(p.weight_data, p.count), dtype=np.float64)
        else:
            ws = np.frombuffer(p.weight_data, dtype="<f4", count=p.count).astype(np.float64)
        return ords, ws

    def _cursors(self, q: SparseVector) -> list[list]:
        """Per-matching-term cursor state: [ordinals, weights, pos, q_weight, tid].

        Built in ascending term-id order (the query's own order), which
        fixes the score accumulation order.
        """
        cursors = []
        for tid, qw in zip(q.term_ids.tolist(), q.weights.tolist()):
            if tid in self._postings:
                ords, ws = self.decode_postings(tid)
                cursors.append([ords.tolist(), ws.tolist(), 0, qw, tid])
        return cursors

    def daat_search(
        self,
        query_id: str,
        q: SparseVector,
        budget: SearchBudget,
        counters: SearchCounters | None = None,
    ) -> RankedList:
        """Exhaustive document-at-a-time merge over the query's postings."""
        top = TopK(budget.k)
        cursors = self._cursors(q)
        scored = 0
        while cursors:
            d = min(c[0][c[2]] for c in cursors)
            score = 0.0
            drained = False
            for c in cursors:
                pos = c[2]
                if c[0][pos] == d:
                    score += c[3] * c[1][pos]
                    scored += 1
                    c[2] = pos + 1
                    if c[2] == len(c[0]):
                        drained = True
            top.push(self.doc_ids[d], score)
            if drained:
                cursors = [c for c in cursors if c[2] < len(c[0])]
        if counters is not None:
            counters.postings_scored += scored
        return top.ranked(query_id)

    def max_score_prune(
        self,
        query_id: str,
        q: SparseVector,
        budget: SearchBudget,
        counters: SearchCounters | None = None,
    ) -> RankedList:
        """MaxScore pruning: identical results to daat_search, less work.

        Terms are split by their score bound (q_weight * max_weight) into a
        non-essential prefix whose combined bound cannot reach the current
        top-k threshold and an essential rest. Candidates are generated
        from essential terms only; non-essential terms are probed per
        candidate, highest bound first, bailing out as soon as the document
        provably cannot enter the top k. Pruning discards only on a strict
        shortfall, so score ties (broken by doc id) come out exactly as in
        the exhaustive merge.
        """
        if not self.all_positive:
            raise ValueError(
                "MaxScore needs strictly positive document weights; this index "
                "holds non-positive entries, use daat_search instead"
            )
        top = TopK(budget.k)
        cursors = self._cursors(q)
        if not cursors:
            return top.ranked(query_id)
        # Ascending bound order; term id breaks bound ties deterministically.
        cursors.sort(key=lambda c: (c[3] * self._postings[c[4]].max_weight if c[3] > 0 else 0.0, c[4]))
        bounds = [
            c[3] * self._postings[c[4]].max_weight if c[3] > 0 else 0.0 for c in cursors
        ]
        prefix = [0.0]
        for b in bounds:
            prefix.append(prefix[-1] + b)
        n_cursors = len(cursors)
        ness = 0  # cursors[:ness] are non-essential
        scored = 0
        while True:
            theta = top.threshold()
            while ness < n_cursors and prefix[ness + 1] < theta:
                ness += 1
            d = None
            for c in cursors[ness:]:
                if c[2] < len(c[0]):
                    cur = c[0][c[2]]
                    if d is None or cur < d:
                        d = cur
            if d is None:
                break
            contribs = []
            for c in cursors[ness:]:
                pos = c[2]
                if pos < len(c[0]) and c[0][pos] == d:
                    contribs.append((c[4], c[3] * c[1][pos]))
                    c[2] = pos + 1
                    scored += 1
            partial = 0.0
            for _, contribution in contribs:
                partial += contribution
            survived = True
            for j in range(ness - 1, -1, -1):
                if partial + prefix[j + 1] < theta:
                    survived = False
                    break
                c = cursors[j]
                pos = bisect_left(c[0], d, c[2])
                c[2] = pos
                if pos < len(c[0]) and c[0][pos] == d:
                    contribution = c[3] * c[1][pos]
                    contribs.append((c[4], contribution))
                    partial += contribution
                    c[2] = pos + 1
                    scored += 1
            if not survived:
                continue
            # Re-sum in ascending term-id order so the score is bit-identical
            # to the exhaustive merge no matter the probe order.
            contribs.sort()
            score = 0.0
            for _, contribution in contribs:
                score += contribution
            top.push(self.doc_ids[d], score)
        if counters is not None:
            counters.postings_scored += scored
        return top.ranked(query_id)

    def size_bytes(self) -> int:
        """Compressed footprint: postings bytes plus doc/term tables."""
        total = 0
        for p in self._postings.values():
            total += len(p.ordinal_data) + len(p.weight_data) + 16
        total += sum(len(d.encode()) for d in self.doc_ids)
        total += sum(len(t.encode()) + 8 for t in self.dictionary.terms)
        return total
