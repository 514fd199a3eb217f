"""Labeled tweet corpora: CSV loading, distribution reports, seeded splits.

The split shuffle is an explicit Fisher-Yates permutation driven by a
splitmix64 generator, so a (corpus, seed) pair produces the same
partition on any platform or implementation that follows the same two
documented algorithms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import IntEnum
from pathlib import Path

from .errors import ConfigError, DataError

__all__ = [
    "Sentiment",
    "TweetRecord",
    "LabeledCorpus",
    "SplitSpec",
    "DistEntry",
    "DistributionReport",
    "LABEL_ALIASES",
    "UNTAGGED_KEY",
    "load_corpus",
    "write_corpus_csv",
    "class_distribution",
    "tag_distribution",
    "shuffle_split",
]


class Sentiment(IntEnum):
    """Three-way sentiment label with fixed integer codes."""

    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @property
    def key(self) -> str:
        return self.name.lower()


# Surface forms accepted in the label column, including Persian names.
# Unlisted values are a hard error so mislabeled rows never slip through.
LABEL_ALIASES: dict[str, Sentiment] = {
    "negative": Sentiment.NEGATIVE,
    "neg": Sentiment.NEGATIVE,
    "0": Sentiment.NEGATIVE,
    "-1": Sentiment.NEGATIVE,
    "منفی": Sentiment.NEGATIVE,
    "neutral": Sentiment.NEUTRAL,
    "neu": Sentiment.NEUTRAL,
    "1": Sentiment.NEUTRAL,
    "خنثی": Sentiment.NEUTRAL,
    "positive": Sentiment.POSITIVE,
    "pos": Sentiment.POSITIVE,
    "2": Sentiment.POSITIVE,
    "+1": Sentiment.POSITIVE,
    "مثبت": Sentiment.POSITIVE,
}

UNTAGGED_KEY = "untagged"


@dataclass(frozen=True)
class TweetRecord:
    id: int
    text: str
    label: Sentiment
    tag: str | None = None


@dataclass(frozen=True)
class LabeledCorpus:
    """Ordered, immutable collection of tweet records with distinct ids."""

    records: tuple[TweetRecord, ...]

    def __post_init__(self) -> None:
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("corpus contains duplicate record ids")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> list[Sentiment]:
        return [r.label for r in self.records]

    def texts(self) -> list[str]:
        return [r.text for r in self.records]


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.8
    seed: int = 42
    stratified: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError(
                f"train_ratio must be in (0, 1), got {self.train_ratio}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class DistEntry:
    key: str
    count: int
    percent: float


@dataclass(frozen=True)
class DistributionReport:
    """Counts and half-up-rounded percentages, largest groups first."""

    entries: tuple[DistEntry, ...]
    total: int

    def to_csv(self) -> str:
        lines = ["key,count,percent"]
        for e in self.entries:
            lines.append(f"{e.key},{e.count},{e.percent:.2f}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict[str, DistEntry]:
        return {e.key: e for e in self.entries}


def load_corpus(
    path: str | Path,
    text_column: str,
    label_column: str,
    tag_column: str | None = None,
) -> LabeledCorpus:
    """Read a UTF-8 CSV with a header row into a LabeledCorpus.

    Record ids are assigned 0..N-1 in file order. Row numbers in error
    messages are 1-based data rows (the header is row 0). A label value
    outside LABEL_ALIASES or an empty text cell is an error, not a skip.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in filter(None, (text_column, label_column, tag_column)):
            if col not in header:
                raise DataError(f"column {col!r} missing from header of {path}")
        records: list[TweetRecord] = []
        for row_no, row in enumerate(reader, start=1):
            text = (row.get(text_column) or "").strip()
            if not text:
                raise DataError(f"empty text on row {row_no} of {path}")
            raw_label = (row.get(label_column) or "").strip()
            label = LABEL_ALIASES.get(raw_label.casefold())
            if label is None:
                raise DataError(
                    f"unmappable label {raw_label!r} on row {row_no} of {path}"
                )
            tag = None
            if tag_column is not None:
                tag = (row.get(tag_column) or "").strip() or None
            records.append(TweetRecord(id=row_no - 1, text=text, label=label, tag=tag))
    if not records:
        raise DataError(f"corpus file {path} has no data rows")
    return LabeledCorpus(records=tuple(records))


def write_corpus_csv(corpus: LabeledCorpus, path: str | Path) -> None:
    """Write canonical columns id,text,label[,tag]; labels use their key
    names, and the tag column appears only when some record carries one."""
    path = Path(path)
    has_tags = any(r.tag is not None for r in corpus.records)
    fields = ["id", "text", "label"] + (["tag"] if has_tags else [])
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for rec in corpus.records:
            row = {"id": rec.id, "text": rec.text, "label": rec.label.key}
            if has_tags:
                row["tag"] = rec.tag if rec.tag is not None else ""
            writer.writerow(row)


def _round_percent(count: int, total: int) -> float:
    # Decimal keeps exact ties (e.g. 39.925) so half-up rounding is faithful.
    pct = Decimal(count) * 100 / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _distribution(counts: dict[str, int], total: int) -> DistributionReport:
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    entries = tuple(
        DistEntry(key=k, count=c, percent=_round_percent(c, total)) for k, c in order
    )
    return DistributionReport(entries=entries, total=total)


def class_distribution(corpus: LabeledCorpus) -> DistributionReport:
    """Count and percentage per sentiment class (only classes present)."""
    if len(corpus) == 0:
        raise DataError("class_distribution of an empty corpus")
    counts: dict[str, int] = {}
    for rec in corpus:
        counts[rec.label.key] = counts.get(rec.label.key, 0) + 1
    return _distribution(counts, len(corpus))


def tag_distribution(corpus: LabeledCorpus) -> DistributionReport:
    """Count and percentage per search-term tag; missing tags group under
    the reserved "untagged" key."""
    if len(corpus) == 0:
        raise DataError("tag_distribution of an empty corpus")
    counts: dict[str, int] = {}
    for rec in corpus:
        key = rec.tag if rec.tag is not None else UNTAGGED_KEY
        counts[key] = counts.get(key, 0) + 1
    return _distribution(counts, len(corpus))


class SplitMix64:
    """splitmix64 sequence generator (Steele et al.'s mixing constants).

    next_u64 advances the state by the golden-gamma increment and mixes;
    randbelow draws unbiased bounded integers by rejection sampling.
    """

    MASK = 2**64 - 1

    def __init__(self, seed: int):
        self._state = seed & self.MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self.MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        limit = (2**64 // n) * n
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n


def _floor_size(ratio: float, n: int) -> int:
    # floor(ratio * n), nudged so binary rounding of values like 0.7 * 10
    # cannot land one below the intended integer.
    return math.floor(ratio * n + 1e-7)


def _fisher_yates(indices: list[int], rng: SplitMix64) -> None:
    # Durstenfeld form, descending index, in place.
    for i in range(len(indices) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        indices[i], indices[j] = indices[j], indices[i]


def shuffle_split(
    corpus: LabeledCorpus, spec: SplitSpec
) -> tuple[LabeledCorpus, LabeledCorpus]:
    """Partition the corpus into (train, test) with |train| = floor(ratio*N).

    Unstratified: one Fisher-Yates shuffle of all record indices; the
    first floor(ratio*N) go to train. Stratified: per-class shuffles in
    class-code order with largest-remainder allocation, so every class
    keeps its train count within one record of ratio*count while the
    total still equals floor(ratio*N).
    """
    n = len(corpus)
    if n < 2:
        raise DataError(f"corpus too small to split (need >= 2 records, got {n})")
    train_size = _floor_size(spec.train_ratio, n)
    rng = SplitMix64(int(spec.seed))
    if not spec.stratified:
        order = list(range(n))
        _fisher_yates(order, rng)
        train_idx = order[:train_size]
        test_idx = order[train_size:]
    else:
        by_class: dict[Sentiment, list[int]] = {s: [] for s in Sentiment}
        for i, rec in enumerate(corpus.records):
            by_class[rec.label].append(i)
        missing = [s.key for s in Sentiment if not by_class[s]]
        if missing:
            raise DataError(
                "stratified split requires every class present; missing: "
                + ", ".join(missing)
            )
        floors = {s: _floor_size(spec.train_ratio, len(by_class[s])) for s in Sentiment}
        remainders = {
            s: spec.train_ratio * len(by_class[s]) - floors[s] for s in Sentiment
        }
        deficit = train_size - sum(floors.values())
        # Largest remainders take the leftover slots; ties go to the
        # smaller class code for determinism.
        for s in sorted(Sentiment, key=lambda s: (-remainders[s], s.value)):
            if deficit <= 0:
                break
            if floors[s] < len(by_class[s]):
                floors[s] += 1
                deficit -= 1
        train_idx, test_idx = [], []
        for s in Sentiment:
            group = list(by_class[s])
            _fisher_yates(group, rng)
            train_idx.extend(group[: floors[s]])
            test_idx.extend(group[floors[s] :])
    train = LabeledCorpus(tuple(corpus.records[i] for i in train_idx))
    test = LabeledCorpus(tuple(corpus.records[i] for i in test_idx))
    return train, test
