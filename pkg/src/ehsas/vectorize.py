"""Token sequences to features: sparse BOW counts and dense vector tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Vocabulary",
    "SparseCountVector",
    "EmbeddingTable",
    "build_vocabulary",
    "bow_transform",
    "load_vectors",
    "save_vectors",
]


@dataclass(frozen=True)
class Vocabulary:
    """Bijection token <-> index, indices in first-seen training order."""

    tokens: tuple[str, ...]
    frequencies: tuple[int, ...]
    min_count: int = 1

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.frequencies):
            raise DataError("vocabulary tokens/frequencies length mismatch")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index  # type: ignore[attr-defined]

    def index_of(self, token: str) -> int | None:
        return self._index.get(token)  # type: ignore[attr-defined]

    def frequency_of(self, token: str) -> int:
        i = self.index_of(token)
        return 0 if i is None else self.frequencies[i]

    def to_csv(self) -> str:
        lines = ["token,index,frequency"]
        for i, tok in enumerate(self.tokens):
            lines.append(f"{tok},{i},{self.frequencies[i]}")
        return "\n".join(lines) + "\n"


def build_vocabulary(
    sequences: Sequence[Sequence[str]], min_count: int = 1
) -> Vocabulary:
    """Collect tokens with corpus frequency >= min_count, first-seen order."""
    if len(sequences) == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    freqs: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            freqs[tok] = freqs.get(tok, 0) + 1
    if not freqs:
        raise DataError("cannot build a vocabulary from an empty corpus")
    kept = [(tok, n) for tok, n in freqs.items() if n >= min_count]
    if not kept:
        raise DataError(
            f"no token reaches min_count={min_count}; vocabulary would be empty"
        )
    return Vocabulary(
        tokens=tuple(t for t, _ in kept),
        frequencies=tuple(n for _, n in kept),
        min_count=min_count,
    )


@dataclass(frozen=True)
class SparseCountVector:
    """Sorted (index, count) pairs over a fixed dimensionality."""

    indices: tuple[int, ...]
    counts: tuple[int, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.counts):
            raise DataError("sparse vector indices/counts length mismatch")
        prev = -1
        for i, c in zip(self.indices, self.counts):
            if i <= prev:
                raise DataError("sparse vector indices must strictly increase")
            if not 0 <= i < self.dim:
                raise DataError(f"sparse vector index {i} outside dim {self.dim}")
            if c < 1:
                raise DataError("sparse vector counts must be >= 1")
            prev = i

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def sum(self) -> int:
        return int(np.sum(self.counts)) if self.counts else 0

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim, dtype=np.float64)
        if self.indices:
            dense[list(self.indices)] = self.counts
        return dense


def bow_transform(tokens: Iterable[str], vocab: Vocabulary) -> SparseCountVector:
    """Count in-vocabulary tokens; out-of-vocabulary tokens are ignored."""
    counts: dict[int, int] = {}
    for tok in tokens:
        i = vocab.index_of(tok)
        if i is not None:
            counts[i] = counts.get(i, 0) + 1
    items = sorted(counts.items())
    return SparseCountVector(
        indices=tuple(i for i, _ in items),
        counts=tuple(c for _, c in items),
        dim=len(vocab),
    )


@dataclass
class EmbeddingTable:
    """Pretrained token -> dense vector lookup of uniform dimension."""

    vectors: dict[str, np.ndarray]
    dim: int

    def __post_init__(self) -> None:
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(
                    f"vector for {tok!r} has {vec.shape[0]} components, "
                    f"expected {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


def load_vectors(path: str | Path) -> EmbeddingTable:
    """Read the text vector format: header `count dimension`, then one
    line per token with `dimension` space-separated decimal components.
    Line numbers in errors are physical file lines (header is line 1)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"vector file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"malformed header in {path}: expected 'count dimension'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(
                f"malformed header in {path}: expected two integers"
            ) from None
        if count < 0 or dim < 1:
            raise DataError(f"malformed header in {path}: count={count} dim={dim}")
        vectors: dict[str, np.ndarray] = {}
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            token, comps = parts[0], parts[1:]
            if len(comps) != dim:
                raise DataError(
                    f"line {line_no} of {path} has {len(comps)} components, "
                    f"expected {dim}"
                )
            if token in vectors:
                raise DataError(f"duplicate token {token!r} on line {line_no} of {path}")
            try:
                row = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError:
                raise DataError(
                    f"line {line_no} of {path} has a non-numeric component"
                ) from None
            if not np.all(np.isfinite(row)):
                raise DataError(
                    f"line {line_no} of {path} has a non-finite component"
                )
            vectors[token] = row
    if len(vectors) != count:
        raise DataError(
            f"{path} declares {count} vectors but contains {len(vectors)}"
        )
    return EmbeddingTable(vectors=vectors, dim=dim)


def save_vectors(table: EmbeddingTable, path: str | Path) -> None:
    """Write the text vector format; floats use shortest exact repr so a
    save -> load round trip reproduces every component bit for bit."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table.vectors)} {table.dim}\n")
        for token, vec in table.vectors.items():
            comps = " ".join(repr(float(v)) for v in vec)
            fh.write(f"{token} {comps}\n")
