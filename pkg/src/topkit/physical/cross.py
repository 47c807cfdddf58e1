"""Run any inner-product scoring model on any index backend.

The logical side of a retrieval system fixes what a score means; the
physical side only has to return the top-k documents under that score.
``cross_execute`` wires an arbitrary (encoder, encoder, comparison)
triple to an arbitrary backend, adapting representations where the
backend's native layout differs from the model's:

* sparse vectors run on the dense backends by materializing them over
  the corpus vocabulary width,
* dense vectors run on the inverted index by treating each nonzero
  dimension as a term.

Not every pair is executable: cosine needs whole-vector norms, which an
inverted index never sees, and max_sim has no single-vector form at all.
Those pairs raise instead of silently computing the wrong thing.
"""

import time
from typing import Sequence

import numpy as np

from ..analysis import TermDictionary
from ..dense import DenseStore
from ..errors import DataError
from ..reprs import (
    Comparison,
    DenseVector,
    LogicalScoringModel,
    MultiVector,
    RankedList,
    SparseVector,
    TopK,
)
from .brute import BruteForceIndex
from .budget import SearchBudget
from .hnsw import HnswIndex, HnswParams
from .inverted import InvertedIndex, SearchCounters

_EXECUTABLE = {
    (Comparison.INNER_PRODUCT, "brute"),
    (Comparison.INNER_PRODUCT, "inverted"),
    (Comparison.INNER_PRODUCT, "hnsw"),
    (Comparison.COSINE, "brute"),
    (Comparison.COSINE, "hnsw"),
    (Comparison.MAX_SIM, "brute"),
}

BACKENDS = ("brute", "inverted", "hnsw")


def round_weights_f32(vec: SparseVector) -> SparseVector:
    """Pass sparse weights through f32, the inverted index's stored width."""
    ws = np.asarray(vec.weights, dtype="<f4").astype(np.float64)
    return SparseVector(zip(vec.term_ids.tolist(), ws.tolist()))


def densify(vec: SparseVector, dim: int) -> DenseVector:
    """Materialize a sparse vector over [0, dim); terms past dim are dropped."""
    values = np.zeros(dim, dtype=np.float64)
    keep = vec.term_ids < dim
    values[vec.term_ids[keep]] = vec.weights[keep]
    return DenseVector(values)


def sparsify(vec: DenseVector) -> SparseVector:
    """Read a dense vector as a sparse one over its nonzero dimensions."""
    values = np.asarray(vec.values, dtype="<f4").astype(np.float64)
    (nz,) = np.nonzero(values)
    return SparseVector(zip(nz.tolist(), values[nz].tolist()))


def _numeric_dictionary(width: int) -> TermDictionary:
    d = TermDictionary()
    d.intern_all(str(i) for i in range(width))
    return d


class _Prepared:
    """Backend plus a brute oracle over the same adapted representations."""

    def __init__(self, search, oracle_index, index_bytes, counters=None):
        self.search = search
        self.oracle_index = oracle_index
        self.index_bytes = index_bytes
        self.counters = counters


class _OverlapOracle:
    """Exhaustive sparse scoring restricted to docs sharing a query term.

    The inverted backend can only ever see documents with at least one
    matching posting, so its ground truth is brute force over that same
    candidate set. Accumulation order (ascending term id) matches the
    flat index, keeping oracle scores bit-identical.
    """

    def __init__(self, items):
        self._docs = [(doc_id, vec.lookup()) for doc_id, vec in items]

    def search(self, query_id: str, q: SparseVector, budget: SearchBudget) -> RankedList:
        pairs = list(zip(q.term_ids.tolist(), q.weights.tolist()))
        top = TopK(budget.k)
        for doc_id, dd in self._docs:
            get = dd.get
            s = 0.0
            matched = False
            for tid, qw in pairs:
                dw = get(tid)
                if dw is not None:
                    s += qw * dw
                    matched = True
            if matched:
                top.push(doc_id, s)
        return top.ranked(query_id)


def _prepare(model, backend, doc_reprs, dictionary, hnsw_params, seed):
    kind = type(doc_reprs[0][1])
    comparison = model.comparison
    counters = None

    if backend == "brute":
        if kind is SparseVector:
            index = BruteForceIndex.from_sparse(doc_reprs)
        elif kind is DenseVector:
            index = BruteForceIndex.from_dense(DenseStore.from_items(doc_reprs), comparison)
        else:
            index = BruteForceIndex.from_multi(doc_reprs)
        prep_query = lambda q: q
        search = lambda qid, q, budget: index.search(qid, q, budget)
        oracle = index

    elif backend == "inverted":
        if kind is DenseVector:
            adapted = [(d, sparsify(v)) for d, v in doc_reprs]
        else:
            adapted = [(d, round_weights_f32(v)) for d, v in doc_reprs]
        if dictionary is None:
            width = max((int(v.term_ids[-1]) for _, v in adapted if len(v)), default=-1) + 1
            dictionary = _numeric_dictionary(width)
        index = InvertedIndex.build(adapted, dictionary)
        counters = SearchCounters()
        prep_query = sparsify if kind is DenseVector else (lambda q: q)
        search = lambda qid, q, budget: index.daat_search(qid, q, budget, counters)
        oracle = _OverlapOracle(adapted)

    else:
        if kind is SparseVector:
            width = max((int(v.term_ids[-1]) for _, v in doc_reprs if len(v)), default=-1) + 1
            adapted = [(d, densify(v, width)) for d, v in doc_reprs]
            prep_query = lambda q: densify(q, width)
        else:
            adapted = doc_reprs
            prep_query = lambda q: q
        store = DenseStore.from_items(adapted)
        metric = "cosine" if comparison is Comparison.COSINE else "inner_product"
        params = hnsw_params or HnswParams(metric=metric)
        if params.metric != metric:
            raise ValueError(
                f"hnsw params use metric {params.metric!r} but the model compares by {metric!r}"
            )
        index = HnswIndex.build(store, params, seed=seed)
        search = lambda qid, q, budget: index.search(qid, q, budget)
        oracle = BruteForceIndex.from_dense(store, comparison)

    return _Prepared(search, oracle, index.size_bytes(), counters), prep_query


def cross_execute(
    model: LogicalScoringModel,
    backend: str,
    corpus: Sequence[tuple[str, str]],
    queries: Sequence[tuple[str, str]],
    budget: SearchBudget,
    *,
    dictionary: TermDictionary | None = None,
    hnsw_params: HnswParams | None = None,
    seed: int = 0,
) -> tuple[dict[str, RankedList], dict]:
    """Execute a scoring model on a backend and profile the run.

    Returns ``(run, profile)`` where ``run`` maps query id to its
    RankedList and ``profile`` records what the execution cost and how
    faithfully the backend reproduced exhaustive scoring: ``recall_at_k``
    is the mean overlap with a brute-force oracle run over the same
    adapted representations. For the inverted backend the sparse weights
    on both sides are rounded to the index's stored f32 width first, so
    a lossless backend shows recall 1.0 rather than float noise.

    Timings cover index building and searching; encoding is the logical
    model's own cost and is identical across backends.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if (model.comparison, backend) not in _EXECUTABLE:
        raise ValueError(
            f"comparison {model.comparison.value!r} cannot execute on backend {backend!r}"
        )
    if not corpus:
        raise DataError("cannot execute over an empty corpus")

    doc_reprs = [(doc_id, model.encode_document(doc_id, text)) for doc_id, text in corpus]
    kinds = {type(v) for _, v in doc_reprs}
    if len(kinds) != 1:
        names = sorted(t.__name__ for t in kinds)
        raise DataError(f"document encoder produced mixed representations: {names}")

    t0 = time.perf_counter()
    prepared, prep_query = _prepare(model, backend, doc_reprs, dictionary, hnsw_params, seed)
    build_ms = (time.perf_counter() - t0) * 1000.0

    run: dict[str, RankedList] = {}
    overlaps: list[float] = []
    failed = 0
    search_seconds = 0.0
    for qid, text in queries:
        try:
            q = prep_query(model.encode_query(qid, text))
        except (DataError, ValueError):
            failed += 1
            run[qid] = RankedList(qid, ())
            continue
        t1 = time.perf_counter()
        result = prepared.search(qid, q, budget)
        search_seconds += time.perf_counter() - t1
        run[qid] = result
        truth = prepared.oracle_index.search(qid, q, budget)
        if truth.doc_ids():
            got = set(result.doc_ids())
            overlaps.append(len(got.intersection(truth.doc_ids())) / len(truth.doc_ids()))

    n_searched = len(queries) - failed
    profile = {
        "model": model.name,
        "backend": backend,
        "comparison": model.comparison.value,
        "docs": len(corpus),
        "queries": len(queries),
        "queries_failed": failed,
        "k": budget.k,
        "index_bytes": prepared.index_bytes,
        "build_ms": build_ms,
        "mean_query_ms": (search_seconds / n_searched * 1000.0) if n_searched else 0.0,
        "recall_at_k": (sum(overlaps) / len(overlaps)) if overlaps else 0.0,
    }
    if prepared.counters is not None:
        profile["postings_scored"] = prepared.counters.postings_scored
    return run, profile
