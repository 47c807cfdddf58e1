"""Composition of retrieval stages: score fusion and reranking.

Fusion linearly combines two runs for the same query after putting each
run's scores on a comparable scale. Reranking rescores a first-stage
candidate list with a second, usually more expensive, scoring model;
sweeping the rerank depth traces the quality curve from cheap-and-shallow
to a full brute-force rescoring of the corpus.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import ConfigError, DataError
from .reprs import LogicalScoringModel, RankedList, ScoredDoc, compare

NORMALIZATIONS = ("min_max", "none")


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 0.5
    normalization: str = "min_max"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )


def _normalized(ranked: RankedList, how: str) -> dict[str, float]:
    scores = {h.doc_id: h.score for h in ranked.hits}
    if how == "none" or not scores:
        return scores
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        # A constant run carries no ranking information.
        return {d: 0.0 for d in scores}
    span = hi - lo
    return {d: (s - lo) / span for d, s in scores.items()}


def fuse(run_a: RankedList, run_b: RankedList, cfg: FusionConfig) -> RankedList:
    """Linear score combination: alpha * a + (1 - alpha) * b.

    Scores are normalized per run first (per the config), the candidate
    set is the union of both hit sets, and a document absent from one run
    is imputed that run's post-normalization minimum. When 1 - alpha is
    exactly representable, fuse(a, b, alpha) == fuse(b, a, 1 - alpha)
    bitwise: multiplication pairs each weight with the same score either
    way, and float addition is commutative.
    """
    if run_a.query_id != run_b.query_id:
        raise DataError(
            f"cannot fuse runs for different queries "
            f"{run_a.query_id!r} and {run_b.query_id!r}"
        )
    a = _normalized(run_a, cfg.normalization)
    b = _normalized(run_b, cfg.normalization)
    floor_a = min(a.values()) if a else 0.0
    floor_b = min(b.values()) if b else 0.0
    fused = []
    for doc_id in set(a) | set(b):
        sa = a.get(doc_id, floor_a)
        sb = b.get(doc_id, floor_b)
        fused.append(ScoredDoc(doc_id, cfg.alpha * sa + (1.0 - cfg.alpha) * sb))
    fused.sort(key=lambda h: (-h.score, h.doc_id))
    return RankedList(run_a.query_id, tuple(fused))


def fuse_runs(
    run_a: Mapping[str, RankedList], run_b: Mapping[str, RankedList], cfg: FusionConfig
) -> dict[str, RankedList]:
    """Fuse two multi-query runs over the union of their query ids.

    A query present in only one run is fused against an empty list from
    the other side, so its scores pass through (scaled by that side's
    weight) rather than being dropped. The result keeps run_a's query
    order, with run_b-only queries after it.
    """
    out = {}
    ordered = list(run_a) + [q for q in run_b if q not in run_a]
    for qid in ordered:
        a = run_a.get(qid, RankedList(qid, ()))
        b = run_b.get(qid, RankedList(qid, ()))
        out[qid] = fuse(a, b, cfg)
    return out


@dataclass(frozen=True)
class RerankConfig:
    reranker: LogicalScoringModel
    depth: int
    carry_first_stage_score: bool = False
    first_stage: Callable[[str, str, int], RankedList] | None = None

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be at least 1, got {self.depth}")


@dataclass(frozen=True)
class RerankResult:
    ranked: RankedList
    failed: tuple[str, ...]  # candidates the reranker could not encode


def rerank(
    candidates: RankedList,
    query_text: str,
    cfg: RerankConfig,
    corpus: Mapping[str, str],
) -> RerankResult:
    """Rescore the top-depth candidates with the reranking model.

    With the carry flag off the output scores are purely the reranker's;
    with it on, the first-stage score is added. Candidates the reranker
    cannot encode sink below every rescored document at a common sunk
    score (ordered among themselves by doc id); candidates beyond the
    depth are dropped.
    """
    if not candidates.hits:
        raise DataError(f"no candidates to rerank for query {candidates.query_id!r}")
    head = candidates.hits[: cfg.depth]
    model = cfg.reranker
    q_rep = model.encode_query(candidates.query_id, query_text)
    rescored = []
    failed = []
    for hit in head:
        if hit.doc_id not in corpus:
            raise DataError(f"candidate {hit.doc_id!r} is not in the corpus")
        try:
            d_rep = model.encode_document(hit.doc_id, corpus[hit.doc_id])
        except (DataError, ValueError):
            failed.append(hit)
            continue
        score = compare(model.comparison, q_rep, d_rep)
        if cfg.carry_first_stage_score:
            score += hit.score
        rescored.append(ScoredDoc(hit.doc_id, score))
    rescored.sort(key=lambda h: (-h.score, h.doc_id))
    if failed:
        sunk = (rescored[-1].score - 1.0) if rescored else 0.0
        rescored.extend(
            ScoredDoc(h.doc_id, sunk) for h in sorted(failed, key=lambda h: h.doc_id)
        )
    return RerankResult(
        RankedList(candidates.query_id, tuple(rescored)),
        tuple(h.doc_id for h in sorted(failed, key=lambda h: h.doc_id)),
    )


def depth_sweep(
    cfg: RerankConfig,
    depths: Sequence[int],
    queries: Sequence[tuple[str, str]],
    corpus: Mapping[str, str],
    qrels,
    metric: Callable[[Mapping[str, RankedList], object], float],
) -> list[tuple[int, float]]:
    """Metric value after reranking at each depth, one row per depth.

    The first stage is retrieved once per (query, depth) through the
    config's first_stage callable; the metric sees the full reranked run
    and the qrels.
    """
    if cfg.first_stage is None:
        raise ConfigError("depth_sweep needs a first_stage retriever in the config")
    if list(depths) != sorted(set(depths)):
        raise ConfigError("depths must be ascending and unique")
    rows = []
    for depth in depths:
        at_depth = RerankConfig(
            reranker=cfg.reranker,
            depth=depth,
            carry_first_stage_score=cfg.carry_first_stage_score,
            first_stage=cfg.first_stage,
        )
        run = {}
        for qid, text in queries:
            candidates = cfg.first_stage(qid, text, depth)
            run[qid] = rerank(candidates, text, at_depth, corpus).ranked
        rows.append((int(depth), float(metric(run, qrels))))
    return rows
