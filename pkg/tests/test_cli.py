"""End-to-end checks of the command-line surface.

Each test drives ``topkit.cli.main`` in-process against real files under
tmp_path and asserts exit codes, output bytes, and the error split:
exit 2 for configuration problems, exit 3 for data problems.
"""

import hashlib
import json
import math
import struct

import numpy as np
import pytest

from topkit.analysis import Analyzer
from topkit.cli import main
from topkit.evaluation import read_run
from topkit.training import (
    TrainConfig,
    build_dictionary,
    init_encoder,
    load_model,
    read_train_data,
)

CORPUS = [
    ("d1", "quantum computing hardware"),
    ("d2", "quantum entanglement in quantum networks"),
    ("d3", "classical computing history"),
    ("d4", "deep ocean currents"),
    ("d5", "music theory and harmony"),
]

QUERIES = [("q1", "quantum computing"), ("q2", "ocean")]

MARKERS = ("alpha", "beta", "gamma", "delta")


def write_corpus(path, items=CORPUS):
    lines = [json.dumps({"id": doc_id, "contents": text}) for doc_id, text in items]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_queries(path, items=QUERIES):
    path.write_text("".join(f"{qid}\t{text}\n" for qid, text in items), encoding="utf-8")


def write_cfg(path, **keys):
    path.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()), encoding="utf-8")


def data_lines(path):
    text = path.read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line and not line.startswith("#")]


def build_bm25_index(tmp_path, corpus_items=CORPUS, name="idx.bin", **extra):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, corpus_items)
    cfg = tmp_path / "index.cfg"
    write_cfg(cfg, corpus=corpus, backend="inverted", model="bm25", **extra)
    out = tmp_path / name
    assert main(["index", "--config", str(cfg), "--output", str(out)]) == 0
    return out


def run_search(tmp_path, index, queries=QUERIES, name="run.txt", extra_args=(), **keys):
    qfile = tmp_path / "queries.tsv"
    write_queries(qfile, queries)
    cfg = tmp_path / "search.cfg"
    write_cfg(cfg, index=index, queries=qfile, **keys)
    out = tmp_path / name
    code = main(["search", "--config", str(cfg), "--output", str(out), *extra_args])
    return code, out


# An independent route to the expected ranking: the BM25 formula written
# out directly, with document weights pushed through f32 the way the
# index stores them. Only documents sharing a term with the query score.
def _f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def bm25_ranking(corpus, query_text, k1=0.9, b=0.4):
    docs = {doc_id: text.lower().split() for doc_id, text in corpus}
    n = len(docs)
    avg = sum(len(tokens) for tokens in docs.values()) / n
    df = {}
    for tokens in docs.values():
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    ranking = []
    for doc_id, tokens in docs.items():
        score = 0.0
        matched = False
        for term in dict.fromkeys(query_text.lower().split()):
            tf = tokens.count(term)
            if tf == 0 or term not in df:
                continue
            matched = True
            idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
            norm = tf + k1 * (1.0 - b + b * len(tokens) / avg)
            score += _f32(idf * tf * (k1 + 1.0) / norm)
        if matched:
            ranking.append((doc_id, score))
    ranking.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranking


# ------------------------------------------------------------ index + search


def test_index_then_search_matches_formula_oracle(tmp_path):
    index = build_bm25_index(tmp_path)
    code, out = run_search(tmp_path, index)
    assert code == 0
    got = {}
    for line in data_lines(out):
        qid, q0, doc_id, rank, score, tag = line.split()
        assert q0 == "Q0" and tag == "topkit"
        got.setdefault(qid, []).append((doc_id, float(score)))
    for qid, text in QUERIES:
        expected = bm25_ranking(CORPUS, text)
        assert [d for d, _ in got[qid]] == [d for d, _ in expected]
        for (_, have), (_, want) in zip(got[qid], expected):
            assert abs(have - want) < 1e-6
    # only d4 mentions the ocean, so q2 gets exactly one hit
    assert len(got["q2"]) == 1 and got["q2"][0][0] == "d4"


def test_index_rerun_is_byte_identical(tmp_path):
    first = build_bm25_index(tmp_path, name="a.bin")
    second = build_bm25_index(tmp_path, name="b.bin")
    assert first.read_bytes() == second.read_bytes()


def test_search_rerun_is_byte_identical(tmp_path):
    index = build_bm25_index(tmp_path)
    _, out_a = run_search(tmp_path, index, name="a.txt")
    _, out_b = run_search(tmp_path, index, name="b.txt")
    assert out_a.read_bytes() == out_b.read_bytes()


def test_index_empty_corpus_exits_3(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("", encoding="utf-8")
    cfg = tmp_path / "index.cfg"
    write_cfg(cfg, corpus=corpus, backend="inverted", model="bm25")
    out = tmp_path / "idx.bin"
    assert main(["index", "--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


def test_search_missing_index_path_exits_2(tmp_path):
    code, out = run_search(tmp_path, tmp_path / "nowhere.bin")
    assert code == 2
    assert not out.exists()


def test_search_k_1_writes_one_line_per_query(tmp_path):
    index = build_bm25_index(tmp_path)
    code, out = run_search(tmp_path, index, extra_args=("--k", "1"))
    assert code == 0
    lines = data_lines(out)
    assert len(lines) == len(QUERIES)
    assert sorted(line.split()[0] for line in lines) == ["q1", "q2"]
    assert all(line.split()[3] == "1" for line in lines)


def test_run_header_embeds_resolved_config(tmp_path):
    index = build_bm25_index(tmp_path)
    code, out = run_search(tmp_path, index)
    assert code == 0
    header = [line for line in out.read_text().splitlines() if line.startswith("#")]
    assert header[0] == "# topkit search"
    config_line = header[1]
    assert config_line.startswith("# config: ")
    for fragment in ("algorithm=daat", "k=10", "tag=topkit", "lowercase=true"):
        assert fragment in config_line


def test_run_blocks_follow_query_input_order(tmp_path):
    index = build_bm25_index(tmp_path)
    reversed_queries = list(reversed(QUERIES))
    code, out = run_search(tmp_path, index, queries=reversed_queries)
    assert code == 0
    qids = [line.split()[0] for line in data_lines(out)]
    assert qids[0] == "q2"
    assert qids == sorted(qids, key=["q2", "q1"].index)


def test_search_maxscore_equals_daat_output(tmp_path):
    index = build_bm25_index(tmp_path)
    _, out_daat = run_search(tmp_path, index, name="daat.txt")
    _, out_ms = run_search(tmp_path, index, name="maxscore.txt", algorithm="maxscore")
    assert data_lines(out_daat) == data_lines(out_ms)


def test_index_needs_output_flag(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    cfg = tmp_path / "index.cfg"
    write_cfg(cfg, corpus=corpus, backend="inverted", model="bm25")
    assert main(["index", "--config", str(cfg)]) == 2


def test_index_rejects_dense_model_on_inverted_backend(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    cfg = tmp_path / "index.cfg"
    write_cfg(cfg, corpus=corpus, backend="inverted", model="toy_dense")
    assert main(["index", "--config", str(cfg), "--output", str(tmp_path / "i.bin")]) == 2


# ------------------------------------------------------------------ training


def write_train_file(path, repeats=4):
    rows = []
    i = 0
    for _ in range(repeats):
        for marker in MARKERS:
            others = [m for m in MARKERS if m != marker]
            rows.append(
                {
                    "query": marker,
                    "positive": f"{marker} filler{i}",
                    "negatives": [f"{others[i % len(others)]} filler{i}"],
                }
            )
            i += 1
    path.write_text(
        "".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8"
    )


def train_model(tmp_path, name="model.bin", extra_args=(), **keys):
    data = tmp_path / "train.jsonl"
    write_train_file(data)
    cfg = tmp_path / "train.cfg"
    write_cfg(cfg, train_data=data, dim=8, epochs=5, batch_size=4, **keys)
    out = tmp_path / name
    code = main(["train", "--config", str(cfg), "--output", str(out), *extra_args])
    return code, out, data


def test_train_zero_learning_rate_keeps_initialization(tmp_path):
    code, out, data = train_model(tmp_path, learning_rate=0.0)
    assert code == 0
    trained = load_model(out)
    instances = read_train_data(data, Analyzer())
    dictionary = build_dictionary(instances)
    config = TrainConfig(dim=8, learning_rate=0.0, epochs=5, batch_size=4, seed=0)
    fresh = init_encoder(dictionary, config)
    assert np.array_equal(trained.table, fresh.table)
    assert trained.query_table is None


def test_train_fixed_seed_gives_identical_file_hash(tmp_path):
    _, out_a, _ = train_model(tmp_path, name="a.bin")
    _, out_b, _ = train_model(tmp_path, name="b.bin")
    digest = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
    assert digest(out_a) == digest(out_b)


def test_train_seed_flag_changes_the_model(tmp_path):
    _, out_a, _ = train_model(tmp_path, name="a.bin")
    _, out_b, _ = train_model(tmp_path, name="b.bin", extra_args=("--seed", "7"))
    assert out_a.read_bytes() != out_b.read_bytes()


def test_train_marker_dataset_loss_decreases(tmp_path, capsys):
    code, _, _ = train_model(tmp_path)
    assert code == 0
    losses = []
    for line in capsys.readouterr().out.splitlines():
        if line.startswith("epoch "):
            losses.append(float(line.split()[-1]))
    assert len(losses) == 5
    assert losses[-1] < losses[0]


def test_train_rejects_k_flag(tmp_path):
    code, _, _ = train_model(tmp_path, extra_args=("--k", "5"))
    assert code == 2


def test_train_malformed_record_exits_3(tmp_path):
    data = tmp_path / "train.jsonl"
    data.write_text('{"positive": "no query field"}\n', encoding="utf-8")
    cfg = tmp_path / "train.cfg"
    write_cfg(cfg, train_data=data)
    out = tmp_path / "model.bin"
    assert main(["train", "--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


# -------------------------------------------------------------------- fusion


def test_fuse_alpha_1_reproduces_first_run_order(tmp_path):
    run_a = tmp_path / "a.run"
    run_a.write_text(
        "q1 Q0 dA 1 3.000000 x\n"
        "q1 Q0 dB 2 2.000000 x\n"
        "q1 Q0 dC 3 1.000000 x\n",
        encoding="utf-8",
    )
    run_b = tmp_path / "b.run"
    run_b.write_text(
        "q1 Q0 dC 1 9.000000 y\nq1 Q0 dA 2 1.000000 y\n", encoding="utf-8"
    )
    cfg = tmp_path / "fuse.cfg"
    write_cfg(cfg, run_a=run_a, run_b=run_b, alpha=1.0)
    out = tmp_path / "fused.run"
    assert main(["fuse", "--config", str(cfg), "--output", str(out)]) == 0
    assert data_lines(out) == [
        "q1 Q0 dA 1 1.000000 topkit",
        "q1 Q0 dB 2 0.500000 topkit",
        "q1 Q0 dC 3 0.000000 topkit",
    ]


def test_fuse_header_and_determinism(tmp_path):
    run_a = tmp_path / "a.run"
    run_a.write_text("q1 Q0 dA 1 2.000000 x\nq1 Q0 dB 2 1.000000 x\n", encoding="utf-8")
    run_b = tmp_path / "b.run"
    run_b.write_text("q1 Q0 dB 1 5.000000 y\nq1 Q0 dA 2 4.000000 y\n", encoding="utf-8")
    cfg = tmp_path / "fuse.cfg"
    write_cfg(cfg, run_a=run_a, run_b=run_b, alpha=0.25)
    out_a = tmp_path / "f1.run"
    out_b = tmp_path / "f2.run"
    assert main(["fuse", "--config", str(cfg), "--output", str(out_a)]) == 0
    assert main(["fuse", "--config", str(cfg), "--output", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    header = out_a.read_text().splitlines()
    assert header[0] == "# topkit fuse"
    assert "alpha=0.25" in header[1] and "normalization=min_max" in header[1]


# ------------------------------------------------------------------- rerank


def rerank_setup(tmp_path):
    code, model, _ = train_model(tmp_path)
    assert code == 0
    corpus = tmp_path / "rcorpus.jsonl"
    write_corpus(
        corpus,
        [
            ("r1", "alpha alpha"),
            ("r2", "alpha beta"),
            ("r3", "zz qq"),
            ("r4", "beta beta"),
        ],
    )
    queries = tmp_path / "rq.tsv"
    write_queries(queries, [("q1", "alpha")])
    candidates = tmp_path / "cand.run"
    candidates.write_text(
        "q1 Q0 r1 1 3.000000 first\n"
        "q1 Q0 r3 2 2.000000 first\n"
        "q1 Q0 r2 3 1.000000 first\n",
        encoding="utf-8",
    )
    return model, corpus, queries, candidates


def test_rerank_sinks_undecodable_candidates(tmp_path, capsys):
    model, corpus, queries, candidates = rerank_setup(tmp_path)
    cfg = tmp_path / "rerank.cfg"
    write_cfg(
        cfg,
        candidates=candidates,
        queries=queries,
        corpus=corpus,
        model="toy_dense",
        model_path=model,
        depth=3,
    )
    out = tmp_path / "reranked.run"
    assert main(["rerank", "--config", str(cfg), "--output", str(out)]) == 0
    lines = data_lines(out)
    docs = [line.split()[2] for line in lines]
    assert sorted(docs) == ["r1", "r2", "r3"]
    assert docs[-1] == "r3"
    stdout = capsys.readouterr().out
    assert "could not encode: 1" in stdout
    header = out.read_text().splitlines()[0]
    assert header == "# topkit rerank"


def test_rerank_depth_drops_candidates_beyond_it(tmp_path):
    model, corpus, queries, candidates = rerank_setup(tmp_path)
    cfg = tmp_path / "rerank.cfg"
    write_cfg(
        cfg,
        candidates=candidates,
        queries=queries,
        corpus=corpus,
        model="toy_dense",
        model_path=model,
        depth=2,
    )
    out = tmp_path / "reranked.run"
    assert main(["rerank", "--config", str(cfg), "--output", str(out)]) == 0
    docs = [line.split()[2] for line in data_lines(out)]
    # only r1 and r3 are rescored (r3 fails and sinks); r2 sat beyond
    # the depth and is dropped
    assert docs == ["r1", "r3"]


def test_rerank_rerun_is_byte_identical(tmp_path):
    model, corpus, queries, candidates = rerank_setup(tmp_path)
    cfg = tmp_path / "rerank.cfg"
    write_cfg(
        cfg,
        candidates=candidates,
        queries=queries,
        corpus=corpus,
        model="toy_dense",
        model_path=model,
        depth=3,
    )
    out_a = tmp_path / "r1.run"
    out_b = tmp_path / "r2.run"
    assert main(["rerank", "--config", str(cfg), "--output", str(out_a)]) == 0
    assert main(["rerank", "--config", str(cfg), "--output", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_rerank_missing_query_text_exits_3(tmp_path):
    model, corpus, _, candidates = rerank_setup(tmp_path)
    queries = tmp_path / "other.tsv"
    write_queries(queries, [("q9", "alpha")])
    cfg = tmp_path / "rerank.cfg"
    write_cfg(
        cfg,
        candidates=candidates,
        queries=queries,
        corpus=corpus,
        model="toy_dense",
        model_path=model,
        depth=3,
    )
    out = tmp_path / "reranked.run"
    assert main(["rerank", "--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


# --------------------------------------------------------------------- eval


def eval_fixture(tmp_path):
    run = tmp_path / "run.txt"
    run.write_text(
        "q1 Q0 d2 1 3.000000 t\n"
        "q1 Q0 d1 2 2.000000 t\n"
        "q2 Q0 d7 1 5.000000 t\n"
        "q2 Q0 d8 2 4.000000 t\n",
        encoding="utf-8",
    )
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 d1 1\nq2 0 d7 1\nq2 0 d9 1\n", encoding="utf-8")
    cfg = tmp_path / "eval.cfg"
    write_cfg(cfg, run=run, qrels=qrels, k=2)
    return cfg


def test_eval_prints_hand_scored_metrics(tmp_path, capsys):
    cfg = eval_fixture(tmp_path)
    assert main(["eval", "--config", str(cfg)]) == 0
    lines = capsys.readouterr().out.splitlines()
    # q1 finds its only relevant doc at rank 2, q2 at rank 1, so
    # MRR = (1/2 + 1)/2 and recall@2 = (1/1 + 1/2)/2; AP adds q2's
    # never-retrieved second relevant doc: (1/2 + 1/2)/2.
    assert lines[0] == "mrr@2 0.750000"
    assert lines[1] == "recall@2 0.750000"
    assert lines[3] == "map 0.500000"
    name, value = lines[2].split()
    assert name == "ndcg@2"
    ndcg_q1 = (1.0 / math.log2(3.0)) / 1.0
    ndcg_q2 = 1.0 / (1.0 + 1.0 / math.log2(3.0))
    assert abs(float(value) - (ndcg_q1 + ndcg_q2) / 2.0) < 5e-7


def test_eval_k_flag_overrides_config(tmp_path, capsys):
    cfg = eval_fixture(tmp_path)
    assert main(["eval", "--config", str(cfg), "--k", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "mrr@1 0.500000"


def test_eval_output_file_matches_stdout(tmp_path, capsys):
    cfg = eval_fixture(tmp_path)
    out = tmp_path / "metrics.txt"
    assert main(["eval", "--config", str(cfg), "--output", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == capsys.readouterr().out


def test_eval_malformed_run_exits_3(tmp_path):
    run = tmp_path / "run.txt"
    run.write_text("q1 Q0 d1 1 2.0\n", encoding="utf-8")
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 d1 1\n", encoding="utf-8")
    cfg = tmp_path / "eval.cfg"
    write_cfg(cfg, run=run, qrels=qrels)
    out = tmp_path / "metrics.txt"
    assert main(["eval", "--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


# ------------------------------------------------------------------- profile


def test_profile_brute_and_inverted_agree_on_recall(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    queries = tmp_path / "queries.tsv"
    write_queries(queries)
    cfg = tmp_path / "profile.cfg"
    write_cfg(cfg, corpus=corpus, queries=queries, backends="brute,inverted", model="bm25", k=3)
    out = tmp_path / "profile.tsv"
    assert main(["profile", "--config", str(cfg), "--output", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert out.read_text(encoding="utf-8") == stdout
    rows = [line.split("\t") for line in data_lines(out)]
    header, brute, inverted = rows
    assert header[0] == "backend" and "recall_at_k" in header
    recall_col = header.index("recall_at_k")
    bytes_col = header.index("index_bytes")
    postings_col = header.index("postings_scored")
    assert brute[0] == "brute" and inverted[0] == "inverted"
    assert brute[recall_col] == "1.000000"
    assert inverted[recall_col] == "1.000000"
    assert brute[bytes_col] != inverted[bytes_col]
    assert brute[postings_col] == "-"
    assert int(inverted[postings_col]) > 0


def test_profile_rejects_unknown_and_duplicate_backends(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus)
    queries = tmp_path / "queries.tsv"
    write_queries(queries)
    for backends in ("brute,lucene", "brute,brute"):
        cfg = tmp_path / "profile.cfg"
        write_cfg(cfg, corpus=corpus, queries=queries, backends=backends, model="bm25")
        assert main(["profile", "--config", str(cfg)]) == 2


# ----------------------------------------------------------- hnsw via the cli


def test_hnsw_index_and_search_roundtrip(tmp_path):
    code, model, _ = train_model(tmp_path)
    assert code == 0
    corpus_items = [
        ("h1", "alpha"),
        ("h2", "beta"),
        ("h3", "gamma"),
        ("h4", "delta"),
        ("h5", "alpha beta"),
    ]
    corpus = tmp_path / "hcorpus.jsonl"
    write_corpus(corpus, corpus_items)
    icfg = tmp_path / "hindex.cfg"
    write_cfg(icfg, corpus=corpus, backend="hnsw", model="toy_dense", model_path=model)
    idx_a = tmp_path / "h1.bin"
    idx_b = tmp_path / "h2.bin"
    assert main(["index", "--config", str(icfg), "--output", str(idx_a)]) == 0
    assert main(["index", "--config", str(icfg), "--output", str(idx_b)]) == 0
    assert idx_a.read_bytes() == idx_b.read_bytes()

    queries = [("q1", "alpha"), ("q2", "gamma"), ("q3", "zz")]
    code, out = run_search(
        tmp_path, idx_a, queries=queries, model_path=model, k=2, name="hnsw.txt"
    )
    assert code == 0
    per_query = {}
    for line in data_lines(out):
        per_query.setdefault(line.split()[0], []).append(line)
    assert len(per_query["q1"]) == 2
    assert len(per_query["q2"]) == 2
    # the model knows none of q3's tokens, so it retrieves nothing
    assert "q3" not in per_query

    code2, out2 = run_search(
        tmp_path, idx_a, queries=queries, model_path=model, k=2, name="hnsw2.txt"
    )
    assert code2 == 0 and out.read_bytes() == out2.read_bytes()


def test_hnsw_search_without_model_exits_2(tmp_path):
    code, model, _ = train_model(tmp_path)
    assert code == 0
    corpus = tmp_path / "hcorpus.jsonl"
    write_corpus(corpus, [("h1", "alpha"), ("h2", "beta"), ("h3", "gamma")])
    icfg = tmp_path / "hindex.cfg"
    write_cfg(icfg, corpus=corpus, backend="hnsw", model="toy_dense", model_path=model)
    idx = tmp_path / "h.bin"
    assert main(["index", "--config", str(icfg), "--output", str(idx)]) == 0
    code, _ = run_search(tmp_path, idx, queries=[("q1", "alpha")])
    assert code == 2


# ------------------------------------------------------ config and data errors


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "eval.cfg"
    write_cfg(cfg, run="r", qrels="q", bogus=1)
    assert main(["eval", "--config", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_duplicate_config_key_exits_2(tmp_path):
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("k = 3\nk = 4\n", encoding="utf-8")
    assert main(["eval", "--config", str(cfg)]) == 2


def test_bad_config_value_exits_2(tmp_path):
    run = tmp_path / "run.txt"
    run.write_text("q1 Q0 d1 1 2.000000 t\n", encoding="utf-8")
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 d1 1\n", encoding="utf-8")
    cfg = tmp_path / "eval.cfg"
    write_cfg(cfg, run=run, qrels=qrels, k="ten")
    assert main(["eval", "--config", str(cfg)]) == 2


def test_missing_required_key_exits_2(tmp_path):
    cfg = tmp_path / "eval.cfg"
    write_cfg(cfg, run="somewhere.run")
    assert main(["eval", "--config", str(cfg)]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["eval", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_malformed_queries_exit_3_and_leave_no_output(tmp_path):
    index = build_bm25_index(tmp_path)
    qfile = tmp_path / "queries.tsv"
    qfile.write_text("q1 no tab separator here\n", encoding="utf-8")
    cfg = tmp_path / "search.cfg"
    write_cfg(cfg, index=index, queries=qfile)
    out = tmp_path / "run.txt"
    assert main(["search", "--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


def test_duplicate_query_id_exits_3(tmp_path):
    index = build_bm25_index(tmp_path)
    qfile = tmp_path / "queries.tsv"
    qfile.write_text("q1\talpha\nq1\tbeta\n", encoding="utf-8")
    cfg = tmp_path / "search.cfg"
    write_cfg(cfg, index=index, queries=qfile)
    assert main(["search", "--config", str(cfg), "--output", str(tmp_path / "o.txt")]) == 3


def test_duplicate_doc_id_exits_3(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, [("d1", "alpha"), ("d1", "beta")])
    cfg = tmp_path / "index.cfg"
    write_cfg(cfg, corpus=corpus, backend="inverted", model="bm25")
    assert main(["index", "--config", str(cfg), "--output", str(tmp_path / "i.bin")]) == 3


def test_usage_errors_exit_2():
    assert main([]) == 2
    assert main(["bogus-command"]) == 2
    assert main(["index"]) == 2
