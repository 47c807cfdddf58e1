"""Contrastive training for the toy dense encoder.

The loss for one instance is the negative log-softmax of the positive
document's score against the scores of its negatives:

    L = -log( exp(s(q, d+)) / (exp(s(q, d+)) + sum_j exp(s(q, d_j-))) )

with s the inner product of mean-pooled embeddings. Negatives come from
in-batch sampling (every other instance's positive) plus any explicit
negatives carried by the instance. Gradients are written out by hand and
checked against finite differences in the test suite; optimization is
plain SGD, which keeps runs bit-reproducible for a given seed.
"""

import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import Analyzer, TermDictionary
from .dense import ToyEncoder
from .errors import ConfigError, DataError
from .ioutil import write_atomic_bytes
from .reprs import DenseVector

log = logging.getLogger(__name__)

MODEL_MAGIC = b"TENC"
MODEL_VERSION = 1

Tokens = tuple[str, ...]


@dataclass(frozen=True)
class TrainInstance:
    """One supervision triple: query, relevant doc, optional negatives."""

    query: Tokens
    positive: Tokens
    negatives: tuple[Tokens, ...] = ()

    def __post_init__(self):
        if not self.query:
            raise DataError("training instance has an empty query")
        if not self.positive:
            raise DataError("training instance has an empty positive document")
        for neg in self.negatives:
            if not neg:
                raise DataError("training instance has an empty negative document")


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 16
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 8
    seed: int = 0
    shared_encoder: bool = True

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError(f"dim must be at least 2, got {self.dim}")
        if not math.isfinite(self.learning_rate) or self.learning_rate < 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


def dpr_loss(q_rep: DenseVector, pos_rep: DenseVector, neg_reps: Sequence[DenseVector]) -> float:
    """Negative log-softmax of the positive score, max-stabilized."""
    if not neg_reps:
        raise ValueError("loss needs at least one negative")
    dims = {q_rep.values.shape[0], pos_rep.values.shape[0], *(n.values.shape[0] for n in neg_reps)}
    if len(dims) != 1:
        raise ValueError(f"mixed representation dims {sorted(dims)}")
    q = q_rep.values
    scores = [float(np.dot(q, pos_rep.values))]
    scores.extend(float(np.dot(q, n.values)) for n in neg_reps)
    m = max(scores)
    lse = m + math.log(sum(math.exp(s - m) for s in scores))
    return lse - scores[0]


def in_batch_negatives(batch: Sequence[TrainInstance]) -> list[list[Tokens]]:
    """Negatives for query i: positives of every other instance, then its own explicit ones."""
    out = []
    for i, inst in enumerate(batch):
        negs = [other.positive for j, other in enumerate(batch) if j != i]
        negs.extend(inst.negatives)
        if not negs:
            raise ValueError("a batch of one instance with no explicit negatives has no training signal")
        out.append(negs)
    return out


def _mean_rows(table: np.ndarray, ids: list[int]) -> np.ndarray:
    return table[ids].mean(axis=0)


def loss_gradient(
    enc: ToyEncoder,
    batch: Sequence[TrainInstance],
    assignments: Sequence[list[Tokens]],
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and its exact gradient w.r.t. the embedding tables.

    Returns ``(loss, grads)`` where grads maps "table" (and "query_table"
    when the encoder is unshared) to arrays of the table's shape. Every
    accumulation runs in a fixed order: instances in batch order, then the
    positive, in-batch negatives, and explicit negatives of each.
    """
    doc_table = enc.table
    query_table = enc.table if enc.query_table is None else enc.query_table
    g_doc = np.zeros_like(doc_table)
    g_query = g_doc if enc.query_table is None else np.zeros_like(query_table)

    total = 0.0
    for inst, negs in zip(batch, assignments):
        q_ids = enc.token_ids(list(inst.query))
        if not q_ids:
            raise ValueError("query has no in-vocabulary tokens")
        doc_ids_lists = [enc.token_ids(list(inst.positive))]
        doc_ids_lists.extend(enc.token_ids(list(n)) for n in negs)
        for ids in doc_ids_lists:
            if not ids:
                raise ValueError("document has no in-vocabulary tokens")

        q = _mean_rows(query_table, q_ids)
        docs = [_mean_rows(doc_table, ids) for ids in doc_ids_lists]
        scores = np.array([float(np.dot(q, d)) for d in docs])
        m = float(scores.max())
        exps = np.exp(scores - m)
        z = float(exps.sum())
        p = exps / z
        total += m + math.log(z) - float(scores[0])

        # dL/ds_j = p_j - [j == 0]; chain through the mean pooling.
        ds = p.copy()
        ds[0] -= 1.0
        dq = np.zeros_like(q)
        for g, d, ids in zip(ds, docs, doc_ids_lists):
            dq += g * d
            np.add.at(g_doc, ids, (g / len(ids)) * q)
        np.add.at(g_query, q_ids, dq / len(q_ids))

    n = len(batch)
    grads = {"table": g_doc / n}
    if enc.query_table is not None:
        grads["query_table"] = g_query / n
    return total / n, grads


def init_encoder(dictionary: TermDictionary, config: TrainConfig) -> ToyEncoder:
    """Seeded uniform(-0.5/dim, 0.5/dim) initialization."""
    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    shape = (len(dictionary), config.dim)
    table = rng.uniform(-bound, bound, size=shape)
    query_table = None if config.shared_encoder else rng.uniform(-bound, bound, size=shape)
    return ToyEncoder(dictionary, table, query_table)


def train(
    config: TrainConfig,
    data: Sequence[TrainInstance],
    dictionary: TermDictionary,
    on_epoch: Callable[[int, float], None] | None = None,
) -> ToyEncoder:
    """Seeded-shuffle mini-batch SGD over the contrastive loss.

    The same seed drives initialization and epoch shuffles, so two runs
    over the same data produce bit-identical encoders. A trailing batch
    of one instance with no explicit negatives is skipped; it carries no
    in-batch signal.
    """
    if not data:
        raise DataError("no training instances")
    enc = init_encoder(dictionary, config)
    # Initialization draws from seed; shuffles get their own stream so the
    # epoch order does not depend on how many init values were drawn.
    shuffle_rng = np.random.default_rng(config.seed + 1)
    n = len(data)
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        trained = 0
        for start in range(0, n, config.batch_size):
            batch = [data[i] for i in order[start : start + config.batch_size]]
            if len(batch) == 1 and not batch[0].negatives:
                continue
            assignments = in_batch_negatives(batch)
            loss, grads = loss_gradient(enc, batch, assignments)
            enc.table -= config.learning_rate * grads["table"]
            if enc.query_table is not None:
                enc.query_table -= config.learning_rate * grads["query_table"]
            epoch_loss += loss * len(batch)
            trained += len(batch)
        mean_loss = epoch_loss / trained if trained else float("nan")
        log.info("epoch %d mean loss %.6f", epoch, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return enc


# -- training data ----------------------------------------------------------


def read_train_data(path: str | Path, analyzer: Analyzer) -> list[TrainInstance]:
    """Read {"query", "positive", "negatives"?} JSONL into analyzed instances."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "query" not in rec or "positive" not in rec:
                raise DataError(f'{path}:{lineno}: expected "query" and "positive" fields')
            try:
                inst = TrainInstance(
                    query=tuple(analyzer.tokenize(rec["query"])),
                    positive=tuple(analyzer.tokenize(rec["positive"])),
                    negatives=tuple(
                        tuple(analyzer.tokenize(neg)) for neg in rec.get("negatives", [])
                    ),
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            out.append(inst)
    if not out:
        raise DataError(f"{path}: no training instances")
    return out


def build_dictionary(data: Sequence[TrainInstance]) -> TermDictionary:
    """Vocabulary over all tokens, in first-appearance order."""
    d = TermDictionary()
    for inst in data:
        d.intern_all(inst.query)
        d.intern_all(inst.positive)
        for neg in inst.negatives:
            d.intern_all(neg)
    return d


# -- model files -------------------------------------------------------------


def save_model(enc: ToyEncoder, path: str | Path) -> None:
    """Write a model file: TENC header, dictionary terms, then f64 tables.

    An unshared encoder stores two tables, query side first.
    """
    parts = [
        MODEL_MAGIC,
        struct.pack(
            "<IQIB",
            MODEL_VERSION,
            len(enc.dictionary),
            enc.dim,
            1 if enc.shared else 0,
        ),
    ]
    for term in enc.dictionary.terms:
        raw = term.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    if enc.query_table is not None:
        parts.append(np.ascontiguousarray(enc.query_table, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(enc.table, dtype="<f8").tobytes())
    write_atomic_bytes(path, b"".join(parts))


def load_model(path: str | Path) -> ToyEncoder:
    data = Path(path).read_bytes()
    if len(data) < 4 + struct.calcsize("<IQIB"):
        raise DataError(f"{path}: truncated model file")
    if data[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    version, vocab, dim, shared = struct.unpack_from("<IQIB", data, 4)
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    if shared not in (0, 1):
        raise DataError(f"{path}: invalid shared-encoder flag {shared}")
    pos = 4 + struct.calcsize("<IQIB")
    dictionary = TermDictionary()
    for _ in range(vocab):
        if pos + 4 > len(data):
            raise DataError(f"{path}: truncated dictionary block")
        (tlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + tlen > len(data):
            raise DataError(f"{path}: truncated dictionary block")
        dictionary.intern(data[pos : pos + tlen].decode("utf-8"))
        pos += tlen
    n_tables = 1 if shared else 2
    table_bytes = vocab * dim * 8
    if len(data) - pos != n_tables * table_bytes:
        raise DataError(
            f"{path}: expected {n_tables * table_bytes} bytes of table data, "
            f"found {len(data) - pos}"
        )

    def read_table():
        nonlocal pos
        flat = np.frombuffer(data, dtype="<f8", count=vocab * dim, offset=pos)
        pos += table_bytes
        return flat.reshape(vocab, dim).astype(np.float64)

    query_table = None if shared else read_table()
    table = read_table()
    return ToyEncoder(dictionary, table, query_table)
