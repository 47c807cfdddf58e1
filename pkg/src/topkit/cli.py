"""Batch command-line surface: one executable, seven subcommands.

Each subcommand reads a `key = value` job file (--config), optionally
overridden by --k and --seed, and writes its result atomically to
--output. Run files embed the fully resolved configuration as comment
lines, so an output always records what produced it.

Exit codes: 0 success, 2 configuration problem (bad keys, bad flag
values, missing input paths), 3 data problem (malformed or empty input
content). Failures leave no partial output behind.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Sequence

from .analysis import Analyzer, TermDictionary, load_stopwords
from .config import Key, canonical_text, read_config, resolve
from .dense import DenseStore, ToyEncoder
from .errors import ConfigError, DataError
from .evaluation import (
    average_precision,
    mrr_at_k,
    ndcg_at_k,
    read_qrels,
    read_run,
    recall_at_k,
    write_run,
)
from .physical import SearchBudget
from .physical.cross import BACKENDS, cross_execute
from .physical.hnsw import HnswIndex, HnswParams
from .physical.inverted import InvertedIndex
from .physical.storage import load_index, persist_index
from .pipeline import FusionConfig, RerankConfig, fuse_runs, rerank
from .reprs import Comparison, LogicalScoringModel, RankedList
from .sparse import (
    Bm25Params,
    bm25_encode_document,
    compute_corpus_stats,
    load_learned_sparse,
    multi_hot_encode_query,
    read_corpus,
    tfidf_encode_document,
)
from .training import (
    TrainConfig,
    build_dictionary,
    load_model,
    read_train_data,
    save_model,
    train,
)
from .ioutil import write_atomic_text

SPARSE_MODELS = ("bm25", "tfidf", "learned_sparse")
DENSE_MODELS = ("toy_dense", "toy_maxsim")

_ANALYSIS_KEYS = {
    "lowercase": Key("bool", True),
    "stopwords": Key("path", None),
}

INDEX_SCHEMA = {
    **_ANALYSIS_KEYS,
    "corpus": Key("path"),
    "backend": Key("str", choices=("inverted", "hnsw")),
    "model": Key("str", choices=("bm25", "tfidf", "learned_sparse", "toy_dense")),
    "comparison": Key("str", "inner_product", choices=("inner_product", "cosine")),
    "k1": Key("float", 0.9),
    "b": Key("float", 0.4),
    "vectors": Key("path", None),
    "model_path": Key("path", None),
    "hnsw_m": Key("int", 16),
    "hnsw_ef_construction": Key("int", 200),
    "seed": Key("int", 0),
}

SEARCH_SCHEMA = {
    **_ANALYSIS_KEYS,
    "index": Key("path"),
    "queries": Key("path"),
    "algorithm": Key("str", "daat", choices=("daat", "maxscore")),
    "model_path": Key("path", None),
    "k": Key("int", 10),
    "ef_search": Key("int", None),
    "tag": Key("str", "topkit"),
    "seed": Key("int", 0),
}

TRAIN_SCHEMA = {
    **_ANALYSIS_KEYS,
    "train_data": Key("path"),
    "dim": Key("int", 16),
    "learning_rate": Key("float", 0.1),
    "epochs": Key("int", 20),
    "batch_size": Key("int", 8),
    "shared_encoder": Key("bool", True),
    "seed": Key("int", 0),
}

FUSE_SCHEMA = {
    "run_a": Key("path"),
    "run_b": Key("path"),
    "alpha": Key("float", 0.5),
    "normalization": Key("str", "min_max", choices=("min_max", "none")),
    "tag": Key("str", "topkit"),
    "seed": Key("int", 0),
}

RERANK_SCHEMA = {
    **_ANALYSIS_KEYS,
    "candidates": Key("path"),
    "queries": Key("path"),
    "corpus": Key("path"),
    "model": Key("str", choices=("toy_dense", "toy_maxsim", "learned_sparse")),
    "comparison": Key("str", "inner_product", choices=("inner_product", "cosine")),
    "model_path": Key("path", None),
    "vectors": Key("path", None),
    "depth": Key("int"),
    "carry_first_stage_score": Key("bool", False),
    "k": Key("int", None),
    "tag": Key("str", "topkit"),
    "seed": Key("int", 0),
}

EVAL_SCHEMA = {
    "run": Key("path"),
    "qrels": Key("path"),
    "k": Key("int", 10),
    "seed": Key("int", 0),
}

PROFILE_SCHEMA = {
    **_ANALYSIS_KEYS,
    "corpus": Key("path"),
    "queries": Key("path"),
    "backends": Key("str"),
    "model": Key(
        "str", choices=("bm25", "tfidf", "learned_sparse", "toy_dense", "toy_maxsim")
    ),
    "comparison": Key("str", "inner_product", choices=("inner_product", "cosine")),
    "k1": Key("float", 0.9),
    "b": Key("float", 0.4),
    "vectors": Key("path", None),
    "model_path": Key("path", None),
    "hnsw_m": Key("int", 16),
    "hnsw_ef_construction": Key("int", 200),
    "k": Key("int", 10),
    "ef_search": Key("int", None),
    "seed": Key("int", 0),
}


# ---------------------------------------------------------------- helpers


def _require_file(path_text: str, what: str) -> Path:
    path = Path(path_text)
    if not path.is_file():
        raise ConfigError(f"{what} file {path} does not exist")
    return path


def _require_output(args) -> Path:
    if args.output is None:
        raise ConfigError(f"the {args.command} command needs --output")
    return Path(args.output)


def read_queries(path: str | Path) -> list[tuple[str, str]]:
    """Read a query file: one "query_id<TAB>text" line per query."""
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataError(f"{path}:{lineno}: expected 'query_id<TAB>text'")
            qid, _, text = line.partition("\t")
            qid = qid.strip()
            text = text.strip()
            if not qid or not text:
                raise DataError(f"{path}:{lineno}: empty query id or text")
            if qid in seen:
                raise DataError(f"{path}:{lineno}: duplicate query id {qid!r}")
            seen.add(qid)
            out.append((qid, text))
    if not out:
        raise DataError(f"{path}: no queries")
    return out


def _analyzer(resolved: dict) -> Analyzer:
    stopwords = frozenset()
    if resolved.get("stopwords"):
        stopwords = load_stopwords(_require_file(resolved["stopwords"], "stopwords"))
    return Analyzer(lowercase=resolved.get("lowercase", True), stopwords=stopwords)


def _corpus_items(resolved: dict) -> list[tuple[str, str]]:
    path = _require_file(resolved["corpus"], "corpus")
    items = list(read_corpus(path))
    seen = set()
    for doc_id, _ in items:
        if doc_id in seen:
            raise DataError(f"{path}: duplicate doc id {doc_id!r}")
        seen.add(doc_id)
    if not items:
        raise DataError(f"{path}: corpus is empty")
    return items


def _header(command: str, resolved: dict) -> str:
    return f"topkit {command}\nconfig: {canonical_text(resolved)}"


def _load_toy_encoder(resolved: dict) -> ToyEncoder:
    if not resolved.get("model_path"):
        raise ConfigError(f"model {resolved['model']!r} needs the model_path key")
    return load_model(_require_file(resolved["model_path"], "model"))


def _learned_vectors(resolved: dict):
    if not resolved.get("vectors"):
        raise ConfigError("model 'learned_sparse' needs the vectors key")
    dictionary = TermDictionary()
    items = load_learned_sparse(_require_file(resolved["vectors"], "vectors"), dictionary)
    return items, dictionary


def _lexical_vectors(resolved: dict, analyzer: Analyzer):
    """Tokenize the corpus and weight it per the configured sparse model."""
    items = _corpus_items(resolved)
    tokenized = [(doc_id, analyzer.tokenize(text)) for doc_id, text in items]
    dictionary = TermDictionary()
    stats = compute_corpus_stats(tokenized, dictionary)
    if resolved["model"] == "bm25":
        params = Bm25Params(k1=resolved["k1"], b=resolved["b"])
        vectors = [
            (doc_id, bm25_encode_document(tokens, stats, params, dictionary))
            for doc_id, tokens in tokenized
        ]
    else:
        vectors = [
            (doc_id, tfidf_encode_document(tokens, stats, dictionary))
            for doc_id, tokens in tokenized
        ]
    return vectors, dictionary, stats


def build_scoring_model(resolved: dict, corpus_items, analyzer: Analyzer):
    """Bind the configured model as encoder closures over the given corpus.

    Returns (model, dictionary) where the dictionary is shared with any
    sparse representations (None for dense models).
    """
    name = resolved["model"]
    comparison = Comparison(resolved.get("comparison", "inner_product"))
    if name in ("bm25", "tfidf"):
        if comparison is not Comparison.INNER_PRODUCT:
            raise ConfigError(f"model {name!r} scores by inner_product only")
        tokenized = [(doc_id, analyzer.tokenize(text)) for doc_id, text in corpus_items]
        dictionary = TermDictionary()
        stats = compute_corpus_stats(tokenized, dictionary)
        params = Bm25Params(k1=resolved["k1"], b=resolved["b"])

        def enc_doc(doc_id, text):
            tokens = analyzer.tokenize(text)
            if name == "bm25":
                return bm25_encode_document(tokens, stats, params, dictionary)
            return tfidf_encode_document(tokens, stats, dictionary)

        def enc_query(query_id, text):
            return multi_hot_encode_query(analyzer.tokenize(text), dictionary)

        return LogicalScoringModel(name, comparison, enc_query, enc_doc), dictionary
    if name == "learned_sparse":
        if comparison is not Comparison.INNER_PRODUCT:
            raise ConfigError("model 'learned_sparse' scores by inner_product only")
        items, dictionary = _learned_vectors(resolved)
        table = dict(items)

        def enc_doc(doc_id, text):
            vec = table.get(doc_id)
            if vec is None:
                raise DataError(f"no learned vector for doc {doc_id!r}")
            return vec

        def enc_query(query_id, text):
            return multi_hot_encode_query(analyzer.tokenize(text), dictionary)

        return LogicalScoringModel(name, comparison, enc_query, enc_doc), dictionary
    enc = _load_toy_encoder(resolved)
    if name == "toy_dense":
        def enc_doc(doc_id, text):
            return enc.encode(analyzer.tokenize(text))

        def enc_query(query_id, text):
            return enc.encode_query(analyzer.tokenize(text))

        return LogicalScoringModel(name, comparison, enc_query, enc_doc), None
    if comparison is not Comparison.INNER_PRODUCT:
        raise ConfigError("model 'toy_maxsim' fixes its own comparison (max_sim)")

    def enc_multi(any_id, text):
        return enc.encode_multi(analyzer.tokenize(text))

    return LogicalScoringModel(name, Comparison.MAX_SIM, enc_multi, enc_multi), None


# ------------------------------------------------------------- subcommands


def cmd_index(resolved: dict, args) -> int:
    output = _require_output(args)
    backend = resolved["backend"]
    model = resolved["model"]
    analyzer = _analyzer(resolved)
    t0 = time.perf_counter()
    if backend == "inverted":
        if model not in SPARSE_MODELS:
            raise ConfigError(f"model {model!r} cannot build an inverted index")
        if resolved["comparison"] != "inner_product":
            raise ConfigError("the inverted backend executes inner_product only")
        if model == "learned_sparse":
            vectors, dictionary = _learned_vectors(resolved)
            stats = None
        else:
            vectors, dictionary, stats = _lexical_vectors(resolved, analyzer)
        index = InvertedIndex.build(vectors, dictionary, stats)
        docs = index.doc_count
        terms = len(index.term_ids)
    else:
        if model != "toy_dense":
            raise ConfigError(f"model {model!r} cannot build an hnsw index")
        enc = _load_toy_encoder(resolved)
        items = _corpus_items(resolved)
        encoded = []
        for doc_id, text in items:
            try:
                encoded.append((doc_id, enc.encode(analyzer.tokenize(text)).values))
            except ValueError:
                raise DataError(
                    f"doc {doc_id!r} has no tokens the model can encode"
                ) from None
        params = HnswParams(
            m=resolved["hnsw_m"],
            ef_construction=resolved["hnsw_ef_construction"],
            metric=resolved["comparison"],
        )
        index = HnswIndex.build(DenseStore.from_items(encoded), params, resolved["seed"])
        docs = len(index.doc_ids)
        terms = 0
    build_ms = (time.perf_counter() - t0) * 1000.0
    persist_index(index, output)
    print(f"backend {backend}")
    print(f"docs {docs}")
    if backend == "inverted":
        print(f"terms {terms}")
    print(f"index_bytes {output.stat().st_size}")
    print(f"build_ms {build_ms:.3f}")
    return 0


def cmd_search(resolved: dict, args) -> int:
    output = _require_output(args)
    index = load_index(_require_file(resolved["index"], "index"))
    queries = read_queries(_require_file(resolved["queries"], "queries"))
    budget = SearchBudget(k=resolved["k"], ef_search=resolved["ef_search"])
    analyzer = _analyzer(resolved)
    run: dict[str, RankedList] = {}
    if isinstance(index, InvertedIndex):
        search = index.daat_search if resolved["algorithm"] == "daat" else index.max_score_prune
        for qid, text in queries:
            q = multi_hot_encode_query(analyzer.tokenize(text), index.dictionary)
            run[qid] = search(qid, q, budget)
    else:
        if not resolved.get("model_path"):
            raise ConfigError("searching an hnsw index needs the model_path key")
        enc = load_model(_require_file(resolved["model_path"], "model"))
        for qid, text in queries:
            try:
                q = enc.encode_query(analyzer.tokenize(text))
            except ValueError:
                run[qid] = RankedList(qid, ())
                continue
            run[qid] = index.search(qid, q, budget)
    write_run(
        output,
        run,
        resolved["tag"],
        header=_header("search", resolved),
        order=[qid for qid, _ in queries],
    )
    print(f"searched {len(queries)} queries at k={budget.k}")
    return 0


def cmd_train(resolved: dict, args) -> int:
    output = _require_output(args)
    analyzer = _analyzer(resolved)
    data = read_train_data(_require_file(resolved["train_data"], "training data"), analyzer)
    config = TrainConfig(
        dim=resolved["dim"],
        learning_rate=resolved["learning_rate"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        seed=resolved["seed"],
        shared_encoder=resolved["shared_encoder"],
    )
    dictionary = build_dictionary(data)

    def on_epoch(epoch: int, loss: float) -> None:
        print(f"epoch {epoch} loss {loss:.6f}")

    enc = train(config, data, dictionary, on_epoch=on_epoch)
    save_model(enc, output)
    print(f"saved model: vocab {len(dictionary)} dim {config.dim}")
    return 0


def cmd_fuse(resolved: dict, args) -> int:
    output = _require_output(args)
    run_a = read_run(_require_file(resolved["run_a"], "run_a"))
    run_b = read_run(_require_file(resolved["run_b"], "run_b"))
    cfg = FusionConfig(alpha=resolved["alpha"], normalization=resolved["normalization"])
    fused = fuse_runs(run_a, run_b, cfg)
    write_run(
        output,
        fused,
        resolved["tag"],
        header=_header("fuse", resolved),
        order=list(fused),
    )
    print(f"fused {len(fused)} queries at alpha={cfg.alpha}")
    return 0


def cmd_rerank(resolved: dict, args) -> int:
    output = _require_output(args)
    candidates = read_run(_require_file(resolved["candidates"], "candidates run"))
    queries = dict(read_queries(_require_file(resolved["queries"], "queries")))
    corpus_items = _corpus_items(resolved)
    corpus = dict(corpus_items)
    analyzer = _analyzer(resolved)
    model, _ = build_scoring_model(resolved, corpus_items, analyzer)
    cfg = RerankConfig(
        reranker=model,
        depth=resolved["depth"],
        carry_first_stage_score=resolved["carry_first_stage_score"],
    )
    out: dict[str, RankedList] = {}
    failed_docs = 0
    for qid in candidates:
        text = queries.get(qid)
        if text is None:
            raise DataError(f"no query text for query id {qid!r}")
        try:
            model.encode_query(qid, text)
        except (DataError, ValueError):
            out[qid] = RankedList(qid, ())
            continue
        result = rerank(candidates[qid], text, cfg, corpus)
        failed_docs += len(result.failed)
        ranked = result.ranked
        if resolved["k"] is not None:
            ranked = RankedList(qid, ranked.hits[: resolved["k"]])
        out[qid] = ranked
    write_run(
        output,
        out,
        resolved["tag"],
        header=_header("rerank", resolved),
        order=list(candidates),
    )
    print(f"reranked {len(out)} queries at depth {cfg.depth}")
    if failed_docs:
        print(f"candidates the reranker could not encode: {failed_docs}")
    return 0


def cmd_eval(resolved: dict, args) -> int:
    run = read_run(_require_file(resolved["run"], "run"))
    qrels = read_qrels(_require_file(resolved["qrels"], "qrels"))
    k = resolved["k"]
    lines = [
        f"mrr@{k} {mrr_at_k(run, qrels, k):.6f}",
        f"recall@{k} {recall_at_k(run, qrels, k):.6f}",
        f"ndcg@{k} {ndcg_at_k(run, qrels, k):.6f}",
        f"map {average_precision(run, qrels):.6f}",
    ]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.output is not None:
        write_atomic_text(args.output, text)
    return 0


_PROFILE_COLUMNS = (
    "backend",
    "model",
    "comparison",
    "docs",
    "queries",
    "queries_failed",
    "k",
    "recall_at_k",
    "postings_scored",
    "index_bytes",
    "build_ms",
    "mean_query_ms",
)


def cmd_profile(resolved: dict, args) -> int:
    backends = [b.strip() for b in resolved["backends"].split(",") if b.strip()]
    if not backends:
        raise ConfigError("backends must list at least one backend")
    for backend in backends:
        if backend not in BACKENDS:
            raise ConfigError(
                f"unknown backend {backend!r}; expected one of {sorted(BACKENDS)}"
            )
    if len(set(backends)) != len(backends):
        raise ConfigError("backends lists a backend twice")
    corpus_items = _corpus_items(resolved)
    queries = read_queries(_require_file(resolved["queries"], "queries"))
    analyzer = _analyzer(resolved)
    model, dictionary = build_scoring_model(resolved, corpus_items, analyzer)
    budget = SearchBudget(k=resolved["k"], ef_search=resolved["ef_search"])
    hnsw_params = HnswParams(
        m=resolved["hnsw_m"],
        ef_construction=resolved["hnsw_ef_construction"],
        metric=resolved["comparison"],
    )
    rows = []
    for backend in backends:
        _, profile = cross_execute(
            model,
            backend,
            corpus_items,
            queries,
            budget,
            dictionary=dictionary,
            hnsw_params=hnsw_params,
            seed=resolved["seed"],
        )
        cells = []
        for column in _PROFILE_COLUMNS:
            value = profile.get(column)
            if value is None:
                cells.append("-")
            elif column == "recall_at_k":
                cells.append(f"{value:.6f}")
            elif column in ("build_ms", "mean_query_ms"):
                cells.append(f"{value:.3f}")
            else:
                cells.append(str(value))
        rows.append("\t".join(cells))
    text = (
        f"# topkit profile\n# config: {canonical_text(resolved)}\n"
        + "\t".join(_PROFILE_COLUMNS)
        + "\n"
        + "".join(row + "\n" for row in rows)
    )
    print(text, end="")
    if args.output is not None:
        write_atomic_text(args.output, text)
    return 0


# ------------------------------------------------------------------- main


_COMMANDS: dict[str, tuple[dict[str, Key], Callable]] = {
    "index": (INDEX_SCHEMA, cmd_index),
    "search": (SEARCH_SCHEMA, cmd_search),
    "train": (TRAIN_SCHEMA, cmd_train),
    "fuse": (FUSE_SCHEMA, cmd_fuse),
    "rerank": (RERANK_SCHEMA, cmd_rerank),
    "eval": (EVAL_SCHEMA, cmd_eval),
    "profile": (PROFILE_SCHEMA, cmd_profile),
}

_HELP = {
    "index": "build and persist an inverted or hnsw index",
    "search": "run queries against a persisted index, writing a TREC run",
    "train": "fit the toy dense encoder and save the model file",
    "fuse": "linearly combine two runs into one",
    "rerank": "rescore the top candidates of a run with a second model",
    "eval": "score a run against qrels",
    "profile": "execute one model on several backends and compare cost",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topkit",
        description="Top-k retrieval: index, search, train, fuse, rerank, eval, profile.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in _COMMANDS:
        s = sub.add_parser(name, help=_HELP[name])
        s.add_argument("--config", required=True, metavar="PATH",
                       help="job file of key = value lines")
        s.add_argument("--output", metavar="PATH", help="output file path")
        s.add_argument("--k", type=int, metavar="N", help="override the config's k")
        s.add_argument("--seed", type=int, metavar="N", help="override the config's seed")
    return parser


def _apply_overrides(resolved: dict, schema: dict, args) -> None:
    if args.k is not None:
        if "k" not in schema:
            raise ConfigError(f"the {args.command} command does not use --k")
        resolved["k"] = args.k
    if args.seed is not None:
        resolved["seed"] = args.seed


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        schema, handler = _COMMANDS[args.command]
        raw = read_config(args.config)
        resolved = resolve(raw, schema)
        _apply_overrides(resolved, schema, args)
        return handler(resolved, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
