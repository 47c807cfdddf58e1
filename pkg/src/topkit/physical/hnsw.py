"""Hierarchical navigable small-world graph for approximate dense top-k.

Layered proximity graph: every node lives on layer 0, and each node is
promoted to higher layers with geometrically decaying probability (level =
floor(-ln(U) * mL), mL = 1/ln(M)). A search descends greedily from the
entry point through the upper layers, then runs a beam of width ef_search
on layer 0. Results are approximate; quality is asserted statistically
against brute force, never per query.

The metric is either raw inner product or cosine. For cosine the stored
matrix (and each query) is unit-normalized once, after which both metrics
reduce to "bigger dot product = closer". Heaps order by negated dot with
node ordinal as tiebreak, so construction and search are deterministic
given the seed and insertion order.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..dense import DenseStore
from ..reprs import DenseVector, RankedList, TopK
from .budget import SearchBudget

METRIC_INNER_PRODUCT = "inner_product"
METRIC_COSINE = "cosine"


@dataclass(frozen=True)
class HnswParams:
    m: int = 16
    ef_construction: int = 200
    metric: str = METRIC_INNER_PRODUCT

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"M must be >= 2, got {self.m}")
        if self.ef_construction < 1:
            raise ValueError(f"ef_construction must be >= 1, got {self.ef_construction}")
        if self.metric not in (METRIC_INNER_PRODUCT, METRIC_COSINE):
            raise ValueError(f"unknown metric {self.metric!r}")

    @property
    def ml(self) -> float:
        return 1.0 / math.log(self.m)


class HnswIndex:
    """Immutable layered graph over a dense vector store."""

    def __init__(
        self,
        doc_ids: list[str],
        matrix: np.ndarray,
        params: HnswParams,
        seed: int,
        levels: list[int],
        neighbors: list[list[list[int]]],
        entry_point: int,
        max_level: int,
    ):
        self.doc_ids = doc_ids
        self.matrix = matrix  # unit rows when metric is cosine
        self.params = params
        self.seed = seed
        self.levels = levels
        self.neighbors = neighbors
        self.entry_point = entry_point
        self.max_level = max_level

    # -- construction ------------------------------------------------------

    @classmethod
    def build(
        cls, store: DenseStore, params: HnswParams = HnswParams(), seed: int = 0
    ) -> "HnswIndex":
        if len(store) < 1:
            raise ValueError("cannot build an HNSW graph over an empty store")
        matrix = np.array(store.matrix, dtype=np.float64)
        if params.metric == METRIC_COSINE:
            norms = np.linalg.norm(matrix, axis=1)
            if np.any(norms == 0.0):
                raise ValueError("cosine metric cannot index a zero vector")
            matrix /= norms[:, None]
        rng = np.random.Generator(np.random.PCG64(seed))
        ml = params.ml
        n = matrix.shape[0]
        index = cls(
            doc_ids=list(store.ids),
            matrix=matrix,
            params=params,
            seed=seed,
            levels=[],
            neighbors=[],
            entry_point=-1,
            max_level=-1,
        )
        for node in range(n):
            u = rng.random()
            while u == 0.0:
                u = rng.random()
            level = int(-math.log(u) * ml)
            index._insert(node, level)
        return index

    def _insert(self, node: int, level: int) -> None:
        self.levels.append(level)
        self.neighbors.append([[] for _ in range(level + 1)])
        if self.entry_point < 0:
            self.entry_point = node
            self.max_level = level
            return
        q = self.matrix[node]
        ep = self.entry_point
        for layer in range(self.max_level, level, -1):
            ep = self._greedy_descend(q, ep, layer)
        m = self.params.m
        for layer in range(min(level, self.max_level), -1, -1):
            found = self._search_layer(q, [ep], layer, self.params.ef_construction)
            # layer 0 gets the full doubled degree budget up front; the
            # denser base layer is what carries beam-search recall at
            # higher dimensionality
            cap = 2 * m if layer == 0 else m
            chosen = self._select_diverse(found, cap)
            self.neighbors[node][layer] = list(chosen)
            for v in chosen:
                self.neighbors[v][layer].append(node)
                if len(self.neighbors[v][layer]) > cap:
                    self._shrink(v, layer, cap)
            ep = found[0][1]
        if level > self.max_level:
            self.max_level = level
            self.entry_point = node

    def _select_diverse(self, ranked: list[tuple[float, int]], m: int) -> list[int]:
        """Pick up to m neighbors, best first, skipping redundant ones.

        A candidate is kept only while it is closer to the query point than
        to every neighbor already kept. Trimming these shortcut edges is
        what keeps the graph navigable: plain closest-m selection wires up
        tight cliques whose members all bypass each other, and beam search
        then stalls inside a cluster instead of crossing it.
        """
        selected: list[int] = []
        skipped: list[int] = []
        for d, v in ranked:
            if len(selected) == m:
                break
            row = self.matrix[v]
            for s in selected:
                if -float(np.dot(row, self.matrix[s])) < d:
                    skipped.append(v)
                    break
            else:
                selected.append(v)
        # backfill with the best pruned candidates so sparse regions keep
        # their full degree
        for v in skipped:
            if len(selected) == m:
                break
            selected.append(v)
        return selected

    def _shrink(self, node: int, layer: int, cap: int) -> None:
        """Re-select an overfull neighbor list down to its cap.

        Uses the same diversity rule as insertion, viewed from this node.
        Removed edges are removed from both endpoints so layer adjacency
        stays symmetric.
        """
        nbrs = self.neighbors[node][layer]
        sims = self.matrix[nbrs] @ self.matrix[node]
        ranked = sorted(((-s, v) for v, s in zip(nbrs, sims)), key=lambda t: (t[0], t[1]))
        keep = self._select_diverse(ranked, cap)
        dropped = [v for v in nbrs if v not in set(keep)]
        self.neighbors[node][layer] = keep
        for v in dropped:
            lst = self.neighbors[v][layer]
            if node in lst:
                lst.remove(node)

    # -- traversal ---------------------------------------------------------

    def _greedy_descend(self, q: np.ndarray, ep: int, layer: int) -> int:
        """Follow the single best neighbor until no improvement (beam of 1)."""
        cur = ep
        cur_dist = -float(np.dot(self.matrix[cur], q))
        while True:
            nbrs = self.neighbors[cur][layer]
            if not nbrs:
                return cur
            sims = self.matrix[nbrs] @ q
            best = cur
            best_dist = cur_dist
            for v, s in zip(nbrs, sims):
                d = -float(s)
                if d < best_dist or (d == best_dist and v < best):
                    best = v
                    best_dist = d
            if best == cur:
                return cur
            cur = best
            cur_dist = best_dist

    def _search_layer(
        self, q: np.ndarray, entries: list[int], layer: int, ef: int
    ) -> list[tuple[float, int]]:
        """Beam search on one layer; returns (dist, node) sorted best-first."""
        matrix = self.matrix
        neighbors = self.neighbors
        visited = bytearray(matrix.shape[0])
        candidates: list[tuple[float, int]] = []
        best: list[tuple[float, int]] = []  # max-heap via negated dist
        for e in entries:
            if visited[e]:
                continue
            visited[e] = 1
            d = -float(np.dot(matrix[e], q))
            candidates.append((d, e))
            best.append((-d, e))
        heapq.heapify(candidates)
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)
        while candidates:
            d, u = heapq.heappop(candidates)
            if d > -best[0][0] and len(best) >= ef:
                break
            fresh = [v for v in neighbors[u][layer] if not visited[v]]
            if not fresh:
                continue
            for v in fresh:
                visited[v] = 1
            sims = matrix[fresh] @ q
            for v, s in zip(fresh, sims.tolist()):
                dv = -s
                if len(best) < ef:
                    heapq.heappush(best, (-dv, v))
                    heapq.heappush(candidates, (dv, v))
                elif dv < -best[0][0]:
                    heapq.heapreplace(best, (-dv, v))
                    heapq.heappush(candidates, (dv, v))
        return sorted(((-nd, v) for nd, v in best), key=lambda t: (t[0], t[1]))

    def search(self, query_id: str, q: DenseVector, budget: SearchBudget) -> RankedList:
        if q.dim != self.matrix.shape[1]:
            raise ValueError(
                f"dimensionality mismatch: query {q.dim} vs index {self.matrix.shape[1]}"
            )
        qv = q.values
        if self.params.metric == METRIC_COSINE:
            norm = float(np.linalg.norm(qv))
            if norm == 0.0:
                raise ValueError("cosine is undefined for a zero-norm query")
            qv = qv / norm
        ep = self.entry_point
        for layer in range(self.max_level, 0, -1):
            ep = self._greedy_descend(qv, ep, layer)
        found = self._search_layer(qv, [ep], 0, max(budget.ef, budget.k))
        top = TopK(budget.k)
        for dist, node in found:
            top.push(self.doc_ids[node], -dist)
        return top.ranked(query_id)

    # -- bookkeeping ---------------------------------------------------------

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def size_bytes(self) -> int:
        total = int(self.matrix.nbytes)
        for per_node in self.neighbors:
            for lst in per_node:
                total += 8 * len(lst) + 8
        total += sum(len(d.encode()) for d in self.doc_ids)
        return total

    def degree_ok(self) -> bool:
        m = self.params.m
        for per_node in self.neighbors:
            for layer, lst in enumerate(per_node):
                cap = 2 * m if layer == 0 else m
                if len(lst) > cap:
                    return False
        return True
