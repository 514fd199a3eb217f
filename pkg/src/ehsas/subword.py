"""Skip-gram token embeddings with character n-gram subword units.

A word's input vector is the sum of its hashed n-gram rows plus one
dedicated whole-word row; out-of-vocabulary words still embed through
their n-grams.  Input rows are materialized lazily: any row not touched
during training is reproduced on demand from ``(seed, row_id)``, so the
2**21-bucket table never has to exist in memory at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .vectorize import EmbeddingTable, Vocabulary, build_vocabulary

__all__ = [
    "SubwordParams",
    "SubwordModel",
    "EmbedResult",
    "fnv1a_64",
    "ngram_decompose",
    "ns_pair_loss",
    "ns_pair_grads",
    "train_skipgram",
    "mean_pair_loss",
    "embed_token",
    "embed_document",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash (xor byte, then multiply by the prime)."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def ngram_decompose(word: str, nmin: int = 3, nmax: int = 6) -> list[str]:
    """Character n-grams of ``<word>`` for n in [nmin, nmax], ordered by
    length then position, plus the full wrapped word exactly once."""
    if not word:
        raise DataError("cannot decompose an empty word")
    if not 1 <= nmin <= nmax:
        raise ConfigError(f"invalid n-gram range {nmin}..{nmax}")
    wrapped = f"<{word}>"
    length = len(wrapped)
    grams: list[str] = []
    for n in range(nmin, nmax + 1):
        if n > length:
            break
        for i in range(length - n + 1):
            grams.append(wrapped[i : i + n])
    if wrapped not in grams:
        grams.append(wrapped)
    return grams


@dataclass(frozen=True)
class SubwordParams:
    dim: int = 300
    nmin: int = 3
    nmax: int = 6
    window: int = 5
    negative: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    seed: int = 1
    bucket_count: int = 2**21
    min_count: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError("embedding dimension must be >= 1")
        if not 1 <= self.nmin <= self.nmax:
            raise ConfigError(f"invalid n-gram range {self.nmin}..{self.nmax}")
        if self.window < 1:
            raise ConfigError("context window must be >= 1")
        if self.negative < 0:
            raise ConfigError("negative sample count must be >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.bucket_count < 1:
            raise ConfigError("bucket count must be >= 1")
        if self.min_count < 1:
            raise ConfigError("min_count must be >= 1")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def ns_pair_loss(z: np.ndarray, targets: np.ndarray, labels: np.ndarray) -> float:
    """Negative-sampling loss for one center vector ``z`` against target
    output rows: -log sigmoid(s) for label 1, -log sigmoid(-s) for label 0."""
    scores = targets @ z
    signed = np.where(labels == 1.0, -scores, scores)
    return float(np.sum(np.logaddexp(0.0, signed)))


def ns_pair_grads(
    z: np.ndarray, targets: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`ns_pair_loss` w.r.t. ``z`` and ``targets``."""
    g = _sigmoid(targets @ z) - labels
    return targets.T @ g, np.outer(g, z)


@dataclass(frozen=True)
class EmbedResult:
    vector: np.ndarray
    missing: bool


class SubwordModel:
    """Trained (or freshly initialized) subword skip-gram embeddings."""

    def __init__(
        self,
        params: SubwordParams,
        vocab: Vocabulary,
        rows: dict[int, np.ndarray] | None = None,
        loss_trace: list[float] | None = None,
    ) -> None:
        self.params = params
        self.vocab = vocab
        self._rows: dict[int, np.ndarray] = rows if rows is not None else {}
        self.loss_trace: list[float] = loss_trace if loss_trace is not None else []
        # Unit row ids per vocabulary word: the whole-word entry gets the
        # dedicated row (== word index); n-grams hash into the bucket space
        # offset by the vocabulary size.
        self._units: list[tuple[int, ...]] = []
        for word_id, word in enumerate(vocab.tokens):
            self._units.append(self._compose_units(word, word_id))
        self._output = np.zeros((len(vocab), params.dim), dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.params.dim

    def _hash_row(self, gram: str) -> int:
        return len(self.vocab) + fnv1a_64(gram.encode("utf-8")) % self.params.bucket_count

    def _compose_units(self, word: str, word_id: int | None) -> tuple[int, ...]:
        wrapped = f"<{word}>"
        units: list[int] = []
        for gram in ngram_decompose(word, self.params.nmin, self.params.nmax):
            if word_id is not None and gram == wrapped:
                units.append(word_id)
            else:
                units.append(self._hash_row(gram))
        return tuple(units)

    def unit_rows(self, token: str) -> tuple[int, ...]:
        word_id = self.vocab.index_of(token)
        if word_id is not None:
            return self._units[word_id]
        return self._compose_units(token, None)

    def _init_row(self, row_id: int) -> np.ndarray:
        rng = np.random.default_rng((self.params.seed, row_id))
        bound = 0.5 / self.params.dim
        return rng.uniform(-bound, bound, self.params.dim)

    def row_vector(self, row_id: int) -> np.ndarray:
        """Read a row without materializing it (pure for untouched rows)."""
        got = self._rows.get(row_id)
        return got if got is not None else self._init_row(row_id)

    def _materialize(self, row_id: int) -> np.ndarray:
        got = self._rows.get(row_id)
        if got is None:
            got = self._init_row(row_id)
            self._rows[row_id] = got
        return got

    def input_vector(self, token: str) -> np.ndarray:
        """Sum of the token's unit rows (training-time center vector)."""
        total = np.zeros(self.params.dim, dtype=np.float64)
        for rid in self.unit_rows(token):
            total += self.row_vector(rid)
        return total

    def to_payload(self) -> dict:
        return {
            "kind": "subword",
            "params": {
                "dim": self.params.dim,
                "nmin": self.params.nmin,
                "nmax": self.params.nmax,
                "window": self.params.window,
                "negative": self.params.negative,
                "epochs": self.params.epochs,
                "learning_rate": self.params.learning_rate,
                "seed": self.params.seed,
                "bucket_count": self.params.bucket_count,
                "min_count": self.params.min_count,
            },
            "tokens": list(self.vocab.tokens),
            "frequencies": list(self.vocab.frequencies),
            "rows": {
                str(rid): [float(v) for v in vec] for rid, vec in self._rows.items()
            },
            "loss_trace": [float(v) for v in self.loss_trace],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SubwordModel":
        try:
            params = SubwordParams(**payload["params"])
            vocab = Vocabulary(
                tokens=tuple(payload["tokens"]),
                frequencies=tuple(int(f) for f in payload["frequencies"]),
                min_count=int(payload["params"].get("min_count", 1)),
            )
            rows = {
                int(rid): np.array(vec, dtype=np.float64)
                for rid, vec in payload["rows"].items()
            }
            trace = [float(v) for v in payload.get("loss_trace", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed subword model payload: {exc}") from None
        return cls(params, vocab, rows=rows, loss_trace=trace)


def _negative_cumulative(vocab: Vocabulary) -> np.ndarray:
    weights = np.array(vocab.frequencies, dtype=np.float64) ** 0.75
    total = weights.sum()
    return np.cumsum(weights / total)


def _iter_pairs(ids: list[int], position: int, span: int) -> list[int]:
    lo = max(0, position - span)
    hi = min(len(ids), position + span + 1)
    return [ids[j] for j in range(lo, hi) if j != position]


def _draw_negatives(
    rng: np.random.Generator, cumulative: np.ndarray, count: int, positive: int
) -> list[int]:
    # Draws equal to the positive target are skipped, not redrawn, so a
    # pair may see fewer than `count` negatives (never blocks on tiny vocabs).
    negs: list[int] = []
    for _ in range(count):
        draw = int(np.searchsorted(cumulative, rng.random(), side="right"))
        draw = min(draw, len(cumulative) - 1)
        if draw != positive:
            negs.append(draw)
    return negs


def train_skipgram(
    sequences: Sequence[Sequence[str]], params: SubwordParams
) -> SubwordModel:
    """Train skip-gram with negative sampling over tokenized documents.

    Deterministic for a fixed corpus and params: window widths and
    negative draws come from one seeded generator consumed in document
    order, and the learning rate decays linearly to zero over
    ``epochs * total_in_vocabulary_tokens`` center positions.
    """
    vocab = build_vocabulary(sequences, params.min_count)
    if len(vocab) == 0:
        raise DataError(
            f"no token reaches min_count={params.min_count}; nothing to train"
        )
    model = SubwordModel(params, vocab)
    kept_ids: list[list[int]] = []
    for seq in sequences:
        ids = [vocab.index_of(t) for t in seq]
        kept_ids.append([i for i in ids if i is not None])
    total_centers = params.epochs * sum(len(ids) for ids in kept_ids)
    if total_centers == 0:
        return model

    cumulative = _negative_cumulative(vocab)
    rng = np.random.default_rng(params.seed)
    output = model._output
    processed = 0
    for _epoch in range(params.epochs):
        epoch_loss = 0.0
        epoch_pairs = 0
        for ids in kept_ids:
            for pos, center in enumerate(ids):
                lr = params.learning_rate * (1.0 - processed / total_centers)
                processed += 1
                span = int(rng.integers(1, params.window + 1))
                contexts = _iter_pairs(ids, pos, span)
                if not contexts:
                    continue
                units = model._units[center]
                row_refs = [model._materialize(rid) for rid in units]
                z = np.zeros(params.dim, dtype=np.float64)
                for ref in row_refs:
                    z += ref
                for target in contexts:
                    negs = _draw_negatives(rng, cumulative, params.negative, target)
                    target_ids = np.array([target] + negs, dtype=np.intp)
                    labels = np.zeros(len(target_ids), dtype=np.float64)
                    labels[0] = 1.0
                    targets = output[target_ids]
                    # overflow here surfaces as a non-finite loss; the
                    # explicit check below turns it into a typed error
                    with np.errstate(over="ignore", invalid="ignore"):
                        loss = ns_pair_loss(z, targets, labels)
                    if not math.isfinite(loss):
                        raise NumericError(
                            f"non-finite loss at center position {processed - 1}"
                        )
                    dz, dtargets = ns_pair_grads(z, targets, labels)
                    np.add.at(output, target_ids, -lr * dtargets)
                    for ref in row_refs:
                        ref -= lr * dz
                    z -= lr * len(row_refs) * dz
                    epoch_loss += loss
                    epoch_pairs += 1
        model.loss_trace.append(epoch_loss / epoch_pairs if epoch_pairs else 0.0)
    return model


def mean_pair_loss(
    model: SubwordModel, sequences: Sequence[Sequence[str]], seed: int = 0
) -> float:
    """Mean negative-sampling pair loss over a corpus, for monitoring.

    Uses the full window on both sides (no width sampling) and a local
    generator for negatives, so the value is reproducible and comparable
    before and after training."""
    vocab = model.vocab
    cumulative = _negative_cumulative(vocab)
    rng = np.random.default_rng(seed)
    total = 0.0
    pairs = 0
    output = model._output
    for seq in sequences:
        ids = [i for i in (vocab.index_of(t) for t in seq) if i is not None]
        for pos, center in enumerate(ids):
            contexts = _iter_pairs(ids, pos, model.params.window)
            if not contexts:
                continue
            z = np.zeros(model.params.dim, dtype=np.float64)
            for rid in model._units[center]:
                z += model.row_vector(rid)
            for target in contexts:
                negs = _draw_negatives(rng, cumulative, model.params.negative, target)
                target_ids = np.array([target] + negs, dtype=np.intp)
                labels = np.zeros(len(target_ids), dtype=np.float64)
                labels[0] = 1.0
                total += ns_pair_loss(z, output[target_ids], labels)
                pairs += 1
    return total / pairs if pairs else 0.0


def embed_token(
    source: SubwordModel | EmbeddingTable, token: str, aggregate: str = "mean"
) -> EmbedResult:
    """Dense vector for one token.

    Subword models embed any non-empty token (mean of its unit rows by
    default, sum with ``aggregate="sum"``); plain lookup tables flag
    tokens they do not contain and return zeros for them."""
    if aggregate not in ("mean", "sum"):
        raise ConfigError(f"unknown aggregate mode {aggregate!r}")
    if isinstance(source, EmbeddingTable):
        vec = source.vectors.get(token)
        if vec is None:
            return EmbedResult(np.zeros(source.dim, dtype=np.float64), True)
        return EmbedResult(vec.astype(np.float64, copy=True), False)
    if not token:
        raise ValueError("cannot embed an empty token")
    units = source.unit_rows(token)
    total = np.zeros(source.dim, dtype=np.float64)
    for rid in units:
        total += source.row_vector(rid)
    if aggregate == "mean":
        total /= len(units)
    return EmbedResult(total, False)


def embed_document(
    source: SubwordModel | EmbeddingTable,
    tokens: Sequence[str],
    aggregate: str = "mean",
) -> EmbedResult:
    """Mean of the token vectors that the source can embed.

    Empty input, or input where every token is unknown to a lookup
    table, yields a zero vector flagged as missing."""
    dim = source.dim
    contributing: list[np.ndarray] = []
    for tok in tokens:
        if not tok:
            continue
        result = embed_token(source, tok, aggregate=aggregate)
        if not result.missing:
            contributing.append(result.vector)
    if not contributing:
        return EmbedResult(np.zeros(dim, dtype=np.float64), True)
    return EmbedResult(np.mean(contributing, axis=0), False)
