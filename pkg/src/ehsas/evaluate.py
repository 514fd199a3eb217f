"""Evaluation metrics (accuracy, per-class and macro precision/recall/F1)
plus the ranked term-frequency export behind word-cloud style figures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Sentiment
from .errors import ConfigError, DataError

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "TermFrequency",
    "confusion_matrix",
    "metrics",
    "metrics_to_csv",
    "render_report",
    "term_frequencies",
    "frequencies_to_csv",
    "compare_models",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows are true classes, columns predicted, in code order."""

    counts: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        if len(self.counts) != 3 or any(len(row) != 3 for row in self.counts):
            raise DataError("confusion matrix must be 3x3")
        if any(c < 0 for row in self.counts for c in row):
            raise DataError("confusion matrix entries must be >= 0")

    @property
    def total(self) -> int:
        return sum(c for row in self.counts for c in row)

    def row_sums(self) -> tuple[int, int, int]:
        return tuple(sum(row) for row in self.counts)  # type: ignore[return-value]

    def col_sums(self) -> tuple[int, int, int]:
        return tuple(
            sum(self.counts[r][c] for r in range(3)) for c in range(3)
        )  # type: ignore[return-value]

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)


def confusion_matrix(
    truth: Sequence[Sentiment | int], predicted: Sequence[Sentiment | int]
) -> ConfusionMatrix:
    if len(truth) != len(predicted):
        raise DataError(
            f"truth and prediction lengths differ: {len(truth)} vs {len(predicted)}"
        )
    if len(truth) == 0:
        raise DataError("cannot build a confusion matrix from empty input")
    counts = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
    for t, p in zip(truth, predicted):
        counts[Sentiment(int(t)).value][Sentiment(int(p)).value] += 1
    return ConfusionMatrix(tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: tuple[float, float, float]
    recall: tuple[float, float, float]
    f1: tuple[float, float, float]
    supports: tuple[int, int, int]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    zero_division_flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        per_class = {
            s.key: {
                "precision": self.precision[s.value],
                "recall": self.recall[s.value],
                "f1": self.f1[s.value],
                "support": self.supports[s.value],
            }
            for s in Sentiment
        }
        return {
            "accuracy": self.accuracy,
            "per_class": per_class,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "zero_division_flags": list(self.zero_division_flags),
        }


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, per-class precision/recall/F1, and their unweighted
    macro means.  A zero row sum (no truth items), zero column sum (never
    predicted), or zero P+R makes the affected quantity 0 and adds a flag
    naming it, so macro values stay comparable across models."""
    total = cm.total
    if total == 0:
        raise DataError("cannot compute metrics for an empty confusion matrix")
    rows = cm.row_sums()
    cols = cm.col_sums()
    diag = [cm.counts[i][i] for i in range(3)]
    flags: list[str] = []
    precision: list[float] = []
    recall: list[float] = []
    f1: list[float] = []
    for s in Sentiment:
        i = s.value
        if cols[i] == 0:
            precision.append(0.0)
            flags.append(f"precision[{s.key}]: class never predicted")
        else:
            precision.append(diag[i] / cols[i])
        if rows[i] == 0:
            recall.append(0.0)
            flags.append(f"recall[{s.key}]: class absent from truth")
        else:
            recall.append(diag[i] / rows[i])
        if precision[i] + recall[i] == 0.0:
            f1.append(0.0)
            flags.append(f"f1[{s.key}]: precision + recall is zero")
        else:
            f1.append(2 * precision[i] * recall[i] / (precision[i] + recall[i]))
    return MetricsReport(
        accuracy=sum(diag) / total,
        precision=tuple(precision),  # type: ignore[arg-type]
        recall=tuple(recall),  # type: ignore[arg-type]
        f1=tuple(f1),  # type: ignore[arg-type]
        supports=rows,
        macro_precision=sum(precision) / 3.0,
        macro_recall=sum(recall) / 3.0,
        macro_f1=sum(f1) / 3.0,
        zero_division_flags=tuple(flags),
    )


def metrics_to_csv(report: MetricsReport) -> str:
    lines = ["class,precision,recall,f1,support"]
    for s in Sentiment:
        i = s.value
        lines.append(
            f"{s.key},{report.precision[i]:.6f},{report.recall[i]:.6f},"
            f"{report.f1[i]:.6f},{report.supports[i]}"
        )
    lines.append(
        f"macro,{report.macro_precision:.6f},{report.macro_recall:.6f},"
        f"{report.macro_f1:.6f},{sum(report.supports)}"
    )
    lines.append(f"accuracy,{report.accuracy:.6f},,,{sum(report.supports)}")
    return "\n".join(lines) + "\n"


def render_report(
    report: MetricsReport, cm: ConfusionMatrix, metadata: dict | None = None
) -> str:
    """Human-readable structured-text report.  Recall/F1 headline numbers
    are macro-averaged over the three classes; that interpretation is
    stated in the output so reports are self-describing."""
    out: list[str] = ["# evaluation report"]
    for key, value in sorted((metadata or {}).items()):
        out.append(f"{key}: {value}")
    out.append("averaging: macro (unweighted mean over the 3 classes)")
    out.append("")
    out.append(f"accuracy: {report.accuracy:.4f}")
    out.append(f"macro_precision: {report.macro_precision:.4f}")
    out.append(f"macro_recall: {report.macro_recall:.4f}")
    out.append(f"macro_f1: {report.macro_f1:.4f}")
    out.append("")
    out.append("per-class (precision / recall / f1 / support):")
    for s in Sentiment:
        i = s.value
        out.append(
            f"  {s.key:9s} {report.precision[i]:.4f} / {report.recall[i]:.4f} / "
            f"{report.f1[i]:.4f} / {report.supports[i]}"
        )
    out.append("")
    out.append("confusion matrix (rows = truth, columns = predicted):")
    header = " ".join(f"{s.key:>9s}" for s in Sentiment)
    out.append(f"  {'':9s} {header}")
    for s in Sentiment:
        row = " ".join(f"{cm.counts[s.value][c]:>9d}" for c in range(3))
        out.append(f"  {s.key:9s} {row}")
    if report.zero_division_flags:
        out.append("")
        out.append("flags:")
        for flag in report.zero_division_flags:
            out.append(f"  - {flag}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class TermFrequency:
    token: str
    count: int
    weight: float  # count / max count, in (0, 1]


def term_frequencies(
    sequences: Iterable[Sequence[str]], top_n: int | None = None
) -> list[TermFrequency]:
    """Ranked corpus term counts: descending count, ties lexicographic."""
    if top_n is not None and top_n < 1:
        raise ConfigError(f"top_n must be >= 1, got {top_n}")
    counts: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise DataError("no tokens to count: corpus is empty after preprocessing")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_n is not None:
        ranked = ranked[:top_n]
    max_count = ranked[0][1] if ranked else 1
    return [TermFrequency(tok, n, n / max_count) for tok, n in ranked]


def frequencies_to_csv(freqs: Sequence[TermFrequency]) -> str:
    lines = ["token,count,weight"]
    for tf in freqs:
        lines.append(f"{tf.token},{tf.count},{repr(tf.weight)}")
    return "\n".join(lines) + "\n"


def compare_models(reports: Sequence[tuple[str, MetricsReport]]) -> str:
    """CSV comparison table, rows sorted by accuracy descending with a
    stable input-order tie rule."""
    if not reports:
        raise DataError("compare_models needs at least one report")
    order = sorted(
        range(len(reports)), key=lambda i: (-reports[i][1].accuracy, i)
    )
    lines = ["model,accuracy,macro_recall,macro_f1"]
    for i in order:
        name, rep = reports[i]
        lines.append(
            f"{name},{rep.accuracy:.6f},{rep.macro_recall:.6f},{rep.macro_f1:.6f}"
        )
    return "\n".join(lines) + "\n"
