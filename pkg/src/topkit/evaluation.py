"""Ranking metrics and the TREC exchange formats.

Metrics follow trec-eval conventions: queries missing from the judgments
are excluded from means, as are queries a metric cannot define (recall
and AP need at least one relevant document, nDCG a nonzero ideal DCG).
The per-query variants expose exactly which queries entered a mean so
callers can report coverage.

Scores are treated as ordinal throughout: every metric depends only on
the ranking, never on score magnitudes.
"""

import math
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError
from .ioutil import write_atomic_text
from .reprs import RankedList, ScoredDoc

Run = dict[str, RankedList]


class Qrels:
    """Relevance judgments: (query_id, doc_id) -> integer grade >= 0."""

    def __init__(self, grades: Mapping[str, Mapping[str, int]] | None = None):
        self._grades: dict[str, dict[str, int]] = {}
        if grades:
            for qid, docs in grades.items():
                for did, grade in docs.items():
                    self.add(qid, did, grade)

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise DataError(f"negative relevance grade {grade} for ({query_id}, {doc_id})")
        docs = self._grades.setdefault(query_id, {})
        if doc_id in docs:
            raise DataError(f"duplicate judgment for ({query_id}, {doc_id})")
        docs[doc_id] = int(grade)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get(query_id, {}).get(doc_id, 0)

    def relevant(self, query_id: str) -> set[str]:
        return {d for d, g in self._grades.get(query_id, {}).items() if g >= 1}

    def grades_for(self, query_id: str) -> dict[str, int]:
        return dict(self._grades.get(query_id, {}))

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._grades

    def query_ids(self) -> list[str]:
        return sorted(self._grades)

    def __len__(self) -> int:
        return len(self._grades)


def _mean(per_query: dict[str, float], what: str) -> float:
    if not per_query:
        raise DataError(f"no queries could be evaluated for {what}")
    return sum(per_query.values()) / len(per_query)


def mrr_per_query(run: Run, qrels: Qrels, k: int = 10) -> dict[str, float]:
    out = {}
    for qid, ranked in run.items():
        if qid not in qrels:
            continue
        rel = qrels.relevant(qid)
        rr = 0.0
        for rank, hit in enumerate(ranked.hits[:k], start=1):
            if hit.doc_id in rel:
                rr = 1.0 / rank
                break
        out[qid] = rr
    return out


def mrr_at_k(run: Run, qrels: Qrels, k: int = 10) -> float:
    return _mean(mrr_per_query(run, qrels, k), f"MRR@{k}")


def recall_per_query(run: Run, qrels: Qrels, k: int) -> dict[str, float]:
    out = {}
    for qid, ranked in run.items():
        if qid not in qrels:
            continue
        rel = qrels.relevant(qid)
        if not rel:
            continue
        top = {hit.doc_id for hit in ranked.hits[:k]}
        out[qid] = len(rel & top) / len(rel)
    return out


def recall_at_k(run: Run, qrels: Qrels, k: int) -> float:
    return _mean(recall_per_query(run, qrels, k), f"recall@{k}")


def _dcg(grades: Iterable[int]) -> float:
    total = 0.0
    for rank, grade in enumerate(grades, start=1):
        if grade > 0:
            total += (2.0**grade - 1.0) / math.log2(rank + 1)
    return total


def ndcg_per_query(run: Run, qrels: Qrels, k: int) -> dict[str, float]:
    out = {}
    for qid, ranked in run.items():
        if qid not in qrels:
            continue
        judged = qrels.grades_for(qid)
        ideal = _dcg(sorted(judged.values(), reverse=True)[:k])
        if ideal == 0.0:
            continue
        got = _dcg(judged.get(hit.doc_id, 0) for hit in ranked.hits[:k])
        out[qid] = got / ideal
    return out


def ndcg_at_k(run: Run, qrels: Qrels, k: int) -> float:
    return _mean(ndcg_per_query(run, qrels, k), f"nDCG@{k}")


def ap_per_query(run: Run, qrels: Qrels) -> dict[str, float]:
    out = {}
    for qid, ranked in run.items():
        if qid not in qrels:
            continue
        rel = qrels.relevant(qid)
        if not rel:
            continue
        found = 0
        total = 0.0
        for rank, hit in enumerate(ranked.hits, start=1):
            if hit.doc_id in rel:
                found += 1
                total += found / rank
        out[qid] = total / len(rel)
    return out


def average_precision(run: Run, qrels: Qrels) -> float:
    return _mean(ap_per_query(run, qrels), "AP")


# -- TREC formats -------------------------------------------------------------


def read_qrels(path: str | Path) -> Qrels:
    """Read whitespace-separated "query_id 0 doc_id grade" lines."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, found {len(parts)}")
            qid, _, did, grade_text = parts
            try:
                grade = int(grade_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: grade {grade_text!r} is not an integer")
            try:
                qrels.add(qid, did, grade)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if len(qrels) == 0:
        raise DataError(f"{path}: no judgments")
    return qrels


def write_qrels(path: str | Path, qrels: Qrels) -> None:
    lines = []
    for qid in qrels.query_ids():
        for did, grade in sorted(qrels.grades_for(qid).items()):
            lines.append(f"{qid} 0 {did} {grade}\n")
    write_atomic_text(path, "".join(lines))


def write_run(
    path: str | Path,
    run: Run,
    tag: str,
    header: str | None = None,
    order: Iterable[str] | None = None,
) -> None:
    """Write "query_id Q0 doc_id rank score tag" lines, 6-decimal scores.

    Queries are written in sorted id order unless an explicit order is
    given, which must cover exactly the run's query ids. An optional
    header is embedded as '#'-prefixed comment lines, which read_run
    skips.
    """
    if order is None:
        ordered = sorted(run)
    else:
        ordered = list(order)
        if sorted(ordered) != sorted(run):
            raise ValueError("order must list exactly the run's query ids")
    parts = []
    if header:
        for line in header.splitlines():
            parts.append(f"# {line}\n" if line else "#\n")
    for qid in ordered:
        for rank, hit in enumerate(run[qid].hits, start=1):
            parts.append(f"{qid} Q0 {hit.doc_id} {rank} {hit.score:.6f} {tag}\n")
    write_atomic_text(path, "".join(parts))


def read_run(path: str | Path) -> Run:
    """Read a run file back into RankedLists.

    Hits are re-sorted with the standard tie-break (score descending,
    doc id ascending), which is the identity on files this package wrote.
    """
    per_query: dict[str, list[ScoredDoc]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields, found {len(parts)}")
            qid, q0, did, rank_text, score_text, _tag = parts
            if q0 != "Q0":
                raise DataError(f"{path}:{lineno}: second field must be Q0, found {q0!r}")
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad rank or score")
            if rank < 1:
                raise DataError(f"{path}:{lineno}: rank must be >= 1, found {rank}")
            if not math.isfinite(score):
                raise DataError(f"{path}:{lineno}: non-finite score")
            per_query.setdefault(qid, []).append(ScoredDoc(did, score))
    if not per_query:
        raise DataError(f"{path}: no run lines")
    run = {}
    for qid, hits in per_query.items():
        seen = set()
        for hit in hits:
            if hit.doc_id in seen:
                raise DataError(f"{path}: duplicate doc {hit.doc_id!r} for query {qid!r}")
            seen.add(hit.doc_id)
        hits.sort(key=lambda h: (-h.score, h.doc_id))
        run[qid] = RankedList(qid, tuple(hits))
    return run
