"""Ground-truth labeling, correlation coefficients and report tables.

Spearman uses midranks (average ranks for ties); zero variance raises an
explicit error instead of leaking NaN into reports.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from laybench.corpus import Corpus

__all__ = [
    "LabeledSample",
    "LabeledData",
    "CorrelationResult",
    "UndefinedCorrelationError",
    "MissingScoresError",
    "label_ground_truth",
    "pearson",
    "spearman",
    "midranks",
    "correlation_table",
    "human_correlation_table",
    "write_correlation_csv",
    "write_correlation_json",
]


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined (too few points or zero variance)."""


class MissingScoresError(ValueError):
    def __init__(self, missing: list[tuple[str, str]]):
        preview = ", ".join(f"{i}/{m}" for i, m in missing[:5])
        suffix = "..." if len(missing) > 5 else ""
        super().__init__(f"missing scores for {len(missing)} samples: {preview}{suffix}")
        self.missing = missing


@dataclass(frozen=True)
class LabeledSample:
    """One text with its technicality label: abstracts 1, lay summaries 0."""

    document_id: str
    kind: str  # abstract | lay_summary
    label: int

    def __post_init__(self):
        expected = 1 if self.kind == "abstract" else 0
        if self.kind not in ("abstract", "lay_summary"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.label != expected:
            raise ValueError(f"{self.kind} must carry label {expected}")

    def key(self) -> tuple[str, str]:
        return (self.document_id, self.kind)


@dataclass(frozen=True)
class LabeledData:
    samples: tuple[LabeledSample, ...]
    skipped: int  # documents without a lay summary


def label_ground_truth(corpus: Corpus) -> LabeledData:
    """Two samples per document having a lay summary; others are counted."""
    samples: list[LabeledSample] = []
    skipped = 0
    for doc in corpus.documents:
        if doc.lay_summary is None:
            skipped += 1
            continue
        samples.append(LabeledSample(doc.id, "abstract", 1))
        samples.append(LabeledSample(doc.id, "lay_summary", 0))
    return LabeledData(tuple(samples), skipped)


def _check_pair(xs: Sequence[float], ys: Sequence[float]) -> None:
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise UndefinedCorrelationError(f"need at least 3 points, got {len(xs)}")


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; errors on zero variance."""
    _check_pair(xs, ys)
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = math.fsum(d * d for d in dx)
    var_y = math.fsum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise UndefinedCorrelationError("zero variance in one of the arguments")
    cov = math.fsum(a * b for a, b in zip(dx, dy))
    r = cov / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, r))


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties replaced by the mean of their rank block."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j + 2) / 2.0  # average of 1-based positions i+1..j+1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of the midranks."""
    _check_pair(xs, ys)
    return pearson(midranks(xs), midranks(ys))


@dataclass(frozen=True)
class CorrelationResult:
    metric_id: str
    spearman: float
    pearson: float
    n: int

    def __post_init__(self):
        if not (-1.0 <= self.spearman <= 1.0 and -1.0 <= self.pearson <= 1.0):
            raise ValueError("coefficients must lie in [-1, 1]")
        if self.n < 3:
            raise ValueError("n must be >= 3")


def correlation_table(
    samples: Sequence[LabeledSample],
    scores: Mapping[str, Mapping[tuple[str, str], float]],
) -> list[CorrelationResult]:
    """One row per metric: correlation of its scores with the 0/1 labels.

    scores maps metric_id -> {(document_id, kind): value}; every labeled
    sample must be covered for every metric.
    """
    rows: list[CorrelationResult] = []
    for metric_id, by_key in scores.items():
        missing = [s.key() for s in samples if s.key() not in by_key]
        if missing:
            raise MissingScoresError([(f"{d}:{k}", metric_id) for d, k in missing])
        xs = [by_key[s.key()] for s in samples]
        ys = [float(s.label) for s in samples]
        rows.append(CorrelationResult(
            metric_id=metric_id,
            spearman=spearman(xs, ys),
            pearson=pearson(xs, ys),
            n=len(samples),
        ))
    return rows


def human_correlation_table(
    metric_scores: Mapping[str, Mapping[tuple[str, str], float]],
    human_means: Mapping[tuple[str, str], float],
) -> list[CorrelationResult]:
    """Correlate each metric with human layness means, paired by (id, system)."""
    rows: list[CorrelationResult] = []
    for metric_id, by_key in metric_scores.items():
        keys = sorted(k for k in human_means if k in by_key)
        missing = sorted(k for k in human_means if k not in by_key)
        if missing:
            raise MissingScoresError([(f"{d}:{s}", metric_id) for d, s in missing])
        if len(keys) < 3:
            raise UndefinedCorrelationError(
                f"{metric_id}: need at least 3 paired scores, got {len(keys)}")
        xs = [by_key[k] for k in keys]
        ys = [human_means[k] for k in keys]
        rows.append(CorrelationResult(
            metric_id=metric_id,
            spearman=spearman(xs, ys),
            pearson=pearson(xs, ys),
            n=len(keys),
        ))
    return rows


def write_correlation_csv(rows: Sequence[CorrelationResult], path: str | Path,
                          *, pearson_first: bool = False) -> None:
    """CSV table; column order follows the correlation tables being mirrored."""
    columns = ("metric", "pearson", "spearman", "n") if pearson_first else \
              ("metric", "spearman", "pearson", "n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            values = {"metric": row.metric_id, "n": row.n,
                      "spearman": f"{row.spearman:.3f}", "pearson": f"{row.pearson:.3f}"}
            writer.writerow([values[c] for c in columns])


def write_correlation_json(rows: Sequence[CorrelationResult], path: str | Path,
                           provenance: Mapping | None = None) -> None:
    payload = {
        "provenance": dict(provenance or {}),
        "rows": [
            {"metric": r.metric_id, "spearman": r.spearman,
             "pearson": r.pearson, "n": r.n}
            for r in rows
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
