"""Human-evaluation protocol: blinded item sampling, annotation storage,
and per-system aggregation.

Assessors score layness, fluency and relevance (1-4 each) for four blinded
summaries per item, then rank the four; rank positions convert to 4/3/2/1
marks. The annotation store is an append-only JSONL file with
write-fsync-ack durability and full validation on load.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from laybench.corpus import Corpus

__all__ = [
    "ASPECTS",
    "BLINDED_LABELS",
    "EvalItem",
    "Candidate",
    "Annotation",
    "AnnotationError",
    "DuplicateAnnotationError",
    "UnknownItemError",
    "AnnotationStore",
    "SystemAggregate",
    "AggregateReport",
    "sample_items",
    "rank_to_marks",
    "aggregate",
    "write_items_jsonl",
    "load_items_jsonl",
    "write_aggregate_csv",
    "write_aggregate_json",
    "PROTOCOL_TEXT",
]

ASPECTS = ("layness", "fluency", "relevance")
BLINDED_LABELS = ("A", "B", "C", "D")
_PERMUTATIONS = tuple(itertools.permutations(range(4)))

# Rubric shown to assessors for the three aspects and the overall ranking.
PROTOCOL_TEXT = {
    "layness": (
        "To what extent does the summary use simple words instead of "
        "technical jargon? To what extent does it omit technical detail "
        "(such as statistical significance) that is hard for lay readers? "
        "Does it use simple syntactic structures and brief clauses? How "
        "well does it explain complex terms and concepts?"
    ),
    "fluency": (
        "How well does the summary flow? Does it use appropriate "
        "grammatical and lexical connections, and do the ideas present a "
        "logical progression?"
    ),
    "relevance": (
        "How well does the summary convey the key information nuggets of "
        "the article? The abstract shown above is the proxy for the gist "
        "of the article."
    ),
    "overall": (
        "Rank the four summaries by informativeness and reading "
        "experience: 1st is best, 4th is worst."
    ),
}


class AnnotationError(ValueError):
    """Annotation fails the protocol's validity rules."""


class DuplicateAnnotationError(AnnotationError):
    """This assessor already annotated this item."""


class UnknownItemError(AnnotationError):
    """Annotation references an item that does not exist."""


@dataclass(frozen=True)
class Candidate:
    blinded_label: str
    system: str
    summary: str


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    document_id: str
    abstract: str
    candidates: tuple[Candidate, ...]
    shuffle_seed: int

    def __post_init__(self):
        if len(self.candidates) != 4:
            raise ValueError("an item carries exactly 4 candidates")
        labels = sorted(c.blinded_label for c in self.candidates)
        if labels != sorted(BLINDED_LABELS):
            raise ValueError(f"blinded labels must be a permutation of "
                             f"{BLINDED_LABELS}, got {labels}")
        systems = {c.system for c in self.candidates}
        if len(systems) != 4:
            raise ValueError("the 4 candidate systems must be distinct")

    def system_of(self, blinded_label: str) -> str:
        for candidate in self.candidates:
            if candidate.blinded_label == blinded_label:
                return candidate.system
        raise KeyError(blinded_label)


@dataclass(frozen=True)
class Annotation:
    assessor_id: str
    item_id: str
    # blinded label -> {"layness": 1..4, "fluency": 1..4, "relevance": 1..4}
    scores: Mapping[str, Mapping[str, int]]
    ranking: tuple[str, ...]  # blinded labels, best first
    timestamp: str = ""

    def __post_init__(self):
        if not self.assessor_id or not self.item_id:
            raise AnnotationError("assessor_id and item_id must be non-empty")
        if sorted(self.scores) != sorted(BLINDED_LABELS):
            raise AnnotationError(
                f"scores must cover exactly labels {BLINDED_LABELS}")
        for label, aspects in self.scores.items():
            if sorted(aspects) != sorted(ASPECTS):
                raise AnnotationError(
                    f"candidate {label}: scores must cover {ASPECTS}")
            for aspect, value in aspects.items():
                if not isinstance(value, int) or not 1 <= value <= 4:
                    raise AnnotationError(
                        f"candidate {label}: {aspect} score {value!r} "
                        "outside 1..4")
        if sorted(self.ranking) != sorted(BLINDED_LABELS):
            raise AnnotationError(
                f"ranking must be a permutation of {BLINDED_LABELS}, "
                f"got {self.ranking}")

    def to_record(self) -> dict:
        return {
            "assessor_id": self.assessor_id,
            "item_id": self.item_id,
            "scores": {label: dict(aspects) for label, aspects in
                       sorted(self.scores.items())},
            "ranking": list(self.ranking),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "Annotation":
        try:
            return cls(
                assessor_id=record["assessor_id"],
                item_id=record["item_id"],
                scores={label: dict(aspects)
                        for label, aspects in record["scores"].items()},
                ranking=tuple(record["ranking"]),
                timestamp=record.get("timestamp", ""),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise AnnotationError(f"malformed annotation record: {exc}") from exc


def _permutation_for(seed: int, document_id: str) -> tuple[int, ...]:
    digest = hashlib.sha256(f"{seed}:{document_id}".encode("utf-8")).digest()
    return _PERMUTATIONS[int.from_bytes(digest[:4], "big") % len(_PERMUTATIONS)]


def _sample_order_key(seed: int, document_id: str) -> str:
    return hashlib.sha256(f"sample:{seed}:{document_id}".encode("utf-8")).hexdigest()


def sample_items(corpus: Corpus, system_summaries: Mapping[str, Mapping[str, str]],
                 n: int = 50, seed: int = 0) -> list[EvalItem]:
    """Blinded items for n documents having all four summaries.

    system_summaries maps three machine system names to per-document
    summaries; the fourth candidate is the document's own lay summary under
    the "Target" system. Sampling and blinding are deterministic in
    (corpus, seed).
    """
    if len(system_summaries) != 3:
        raise ValueError("expected exactly 3 machine systems beside Target, "
                         f"got {sorted(system_summaries)}")
    if "Target" in system_summaries:
        raise ValueError("Target summaries come from the corpus, not the inputs")
    eligible = []
    for doc in corpus.documents:
        if doc.lay_summary is None:
            continue
        if all(doc.id in summaries for summaries in system_summaries.values()):
            eligible.append(doc)
    if len(eligible) < n:
        raise ValueError(f"only {len(eligible)} documents have all four "
                         f"summaries; need {n}")
    eligible.sort(key=lambda d: _sample_order_key(seed, d.id))
    items: list[EvalItem] = []
    for doc in sorted(eligible[:n], key=lambda d: d.id):
        ordered_systems = ["Target"] + sorted(system_summaries)
        perm = _permutation_for(seed, doc.id)
        candidates = []
        for label_idx, system_idx in enumerate(perm):
            system = ordered_systems[system_idx]
            summary = (doc.lay_summary if system == "Target"
                       else system_summaries[system][doc.id])
            candidates.append(Candidate(
                blinded_label=BLINDED_LABELS[label_idx],
                system=system, summary=summary))
        items.append(EvalItem(
            item_id=f"item-{doc.id}", document_id=doc.id,
            abstract=doc.abstract, candidates=tuple(candidates),
            shuffle_seed=seed))
    return items


def rank_to_marks(rank_position: int) -> int:
    """1st -> 4 marks, 2nd -> 3, 3rd -> 2, 4th -> 1."""
    if rank_position not in (1, 2, 3, 4):
        raise ValueError(f"rank position must be 1..4, got {rank_position}")
    return 5 - rank_position


class AnnotationStore:
    """Append-only JSONL store; a record is durable before it is acknowledged."""

    def __init__(self, path: str | Path, items: Mapping[str, EvalItem]):
        self.path = Path(path)
        self._items = dict(items)
        self._annotations: list[Annotation] = []
        self._seen: set[tuple[str, str]] = set()
        self._write_lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise AnnotationError(
                            f"{self.path}:{line_no}: malformed JSON "
                            f"({exc.msg})") from exc
                    annotation = Annotation.from_record(record)
                    self._index(annotation, line_no)

    def _index(self, annotation: Annotation, line_no: int | None = None) -> None:
        key = (annotation.assessor_id, annotation.item_id)
        if key in self._seen:
            where = f" (line {line_no})" if line_no else ""
            raise DuplicateAnnotationError(
                f"duplicate annotation for {key}{where}")
        if annotation.item_id not in self._items:
            raise UnknownItemError(f"unknown item {annotation.item_id!r}")
        self._seen.add(key)
        self._annotations.append(annotation)

    def record(self, annotation: Annotation) -> dict:
        """Validate, append durably (write + fsync), then acknowledge.

        Writers are serialized; the duplicate check and the append happen
        under one lock so concurrent assessors cannot race a duplicate in.
        """
        with self._write_lock:
            key = (annotation.assessor_id, annotation.item_id)
            if key in self._seen:
                raise DuplicateAnnotationError(f"duplicate annotation for {key}")
            if annotation.item_id not in self._items:
                raise UnknownItemError(f"unknown item {annotation.item_id!r}")
            line = json.dumps(annotation.to_record(), ensure_ascii=False,
                              sort_keys=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line)
                fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._seen.add(key)
            self._annotations.append(annotation)
            return {"recorded": True, "assessor_id": annotation.assessor_id,
                    "item_id": annotation.item_id,
                    "total": len(self._annotations)}

    def annotations(self) -> tuple[Annotation, ...]:
        return tuple(self._annotations)

    def items(self) -> dict[str, EvalItem]:
        return dict(self._items)

    def annotated_item_ids(self, assessor_id: str) -> set[str]:
        return {item_id for a_id, item_id in self._seen if a_id == assessor_id}

    def progress(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for assessor_id, _ in self._seen:
            counts[assessor_id] = counts.get(assessor_id, 0) + 1
        return dict(sorted(counts.items()))


@dataclass(frozen=True)
class SystemAggregate:
    layness: float
    fluency: float
    relevance: float
    ranking_marks: float
    n: int


@dataclass(frozen=True)
class AggregateReport:
    per_system: Mapping[str, SystemAggregate]
    annotations: int


def aggregate(annotations: Sequence[Annotation],
              items: Mapping[str, EvalItem]) -> AggregateReport:
    """Un-blind and average aspect scores and rank marks per system."""
    if not annotations:
        raise ValueError("need at least one annotation")
    sums: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    for annotation in annotations:
        item = items.get(annotation.item_id)
        if item is None:
            raise UnknownItemError(f"unknown item {annotation.item_id!r}")
        for label, aspects in annotation.scores.items():
            system = item.system_of(label)
            bucket = sums.setdefault(
                system, {"layness": 0.0, "fluency": 0.0, "relevance": 0.0,
                         "marks": 0.0})
            for aspect in ASPECTS:
                bucket[aspect] += aspects[aspect]
            counts[system] = counts.get(system, 0) + 1
        for position, label in enumerate(annotation.ranking, start=1):
            system = item.system_of(label)
            sums[system]["marks"] += rank_to_marks(position)
    per_system = {
        system: SystemAggregate(
            layness=bucket["layness"] / counts[system],
            fluency=bucket["fluency"] / counts[system],
            relevance=bucket["relevance"] / counts[system],
            ranking_marks=bucket["marks"] / counts[system],
            n=counts[system],
        )
        for system, bucket in sorted(sums.items())
    }
    return AggregateReport(per_system=per_system, annotations=len(annotations))


# --- serialization ----------------------------------------------------------


def write_items_jsonl(items: Sequence[EvalItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            record = {
                "item_id": item.item_id,
                "document_id": item.document_id,
                "abstract": item.abstract,
                "candidates": [
                    {"blinded_label": c.blinded_label, "system": c.system,
                     "summary": c.summary}
                    for c in item.candidates
                ],
                "shuffle_seed": item.shuffle_seed,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_items_jsonl(path: str | Path) -> dict[str, EvalItem]:
    items: dict[str, EvalItem] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            item = EvalItem(
                item_id=record["item_id"],
                document_id=record["document_id"],
                abstract=record["abstract"],
                candidates=tuple(Candidate(c["blinded_label"], c["system"],
                                           c["summary"])
                                 for c in record["candidates"]),
                shuffle_seed=record["shuffle_seed"],
            )
            items[item.item_id] = item
    return items


def write_aggregate_csv(report: AggregateReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["system", "layness", "fluency", "relevance",
                         "ranking_marks", "n"])
        for system, agg in report.per_system.items():
            writer.writerow([system, f"{agg.layness:.3f}", f"{agg.fluency:.3f}",
                             f"{agg.relevance:.3f}", f"{agg.ranking_marks:.3f}",
                             agg.n])


def write_aggregate_json(report: AggregateReport, path: str | Path) -> None:
    payload = {
        "annotations": report.annotations,
        "per_system": {
            system: {"layness": agg.layness, "fluency": agg.fluency,
                     "relevance": agg.relevance,
                     "ranking_marks": agg.ranking_marks, "n": agg.n}
            for system, agg in report.per_system.items()
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
