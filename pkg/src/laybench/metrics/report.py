"""Per-summary metric records and the batch evaluation driver."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from laybench.corpus import Corpus, DEFAULT_TOKENIZER, TokenBudget, Tokenizer
from laybench.llmgate import Gateway
from laybench.metrics.ceonp import NoNounPhrasesError, ceonp
from laybench.metrics.llm import RaterParseError, llm_rater, llm_score
from laybench.metrics.readability import EmptyTextError, coleman_liau
from laybench.metrics.rouge import rouge_geometric_mean, rouge_l, rouge_n

__all__ = [
    "METRIC_ORIENTATION",
    "MetricValue",
    "MetricReport",
    "rater_metric_id",
    "evaluate_summaries",
    "write_metric_jsonl",
]

# Lower = more lay for every layness metric; ROUGE is a similarity score.
METRIC_ORIENTATION = {
    "CLI": "lower_more_lay",
    "CEoNP": "lower_more_lay",
    "RaterGPTclass": "lower_more_lay",
    "RaterVicunaClass": "lower_more_lay",
    "LLMScore": "lower_more_lay",
    "R1": "higher_more_similar",
    "R2": "higher_more_similar",
    "RL": "higher_more_similar",
    "RougeGeoMean": "higher_more_similar",
}


def rater_metric_id(backend_id: str) -> str:
    return "RaterVicunaClass" if "vicuna" in backend_id.lower() else "RaterGPTclass"


@dataclass(frozen=True)
class MetricValue:
    metric_id: str
    value: float
    orientation: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric_id not in METRIC_ORIENTATION:
            raise ValueError(f"unknown metric_id {self.metric_id!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric_id}: value must be finite")
        if self.metric_id in ("R1", "R2", "RL", "RougeGeoMean") and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric_id}: value {self.value} outside [0, 1]")
        if self.metric_id.startswith("Rater") and not 0.0 <= self.value <= 9.0:
            raise ValueError(f"{self.metric_id}: value {self.value} outside [0, 9]")


class MetricReport:
    """Metric values keyed by (document_id, system, metric_id, variant)."""

    def __init__(self):
        self._values: dict[tuple[str, str, str, str], MetricValue] = {}
        self._order: list[tuple[str, str, str, str]] = []

    def add(self, document_id: str, system: str, value: MetricValue,
            variant: str = "") -> None:
        key = (document_id, system, value.metric_id, variant)
        if key in self._values:
            raise ValueError(f"duplicate metric record {key}")
        self._values[key] = value
        self._order.append(key)

    def get(self, document_id: str, system: str, metric_id: str,
            variant: str = "") -> MetricValue | None:
        return self._values.get((document_id, system, metric_id, variant))

    def __len__(self) -> int:
        return len(self._values)

    def records(self) -> Iterable[dict]:
        for doc_id, system, metric_id, variant in self._order:
            mv = self._values[(doc_id, system, metric_id, variant)]
            yield {
                "id": doc_id,
                "system": system,
                "metric": metric_id,
                "value": mv.value,
                "provenance": dict(mv.provenance),
            }

    def mean_by_system(self, metric_id: str, variant: str = "") -> dict[str, float]:
        sums: dict[str, list[float]] = {}
        for (_, system, mid, var), mv in self._values.items():
            if mid == metric_id and var == variant:
                sums.setdefault(system, []).append(mv.value)
        return {system: sum(vals) / len(vals) for system, vals in sorted(sums.items())}


def write_metric_jsonl(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in report.records():
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


KNOWN_EVAL_METRICS = ("cli", "rouge", "ceonp", "rater", "llmscore")


def evaluate_summaries(
    summaries: Sequence[Mapping],
    corpus: Corpus,
    metrics: Sequence[str],
    *,
    gateway: Gateway | None = None,
    backend_id: str | None = None,
    budgets: TokenBudget = TokenBudget(),
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    np_spans_by_id: Mapping[str, list[tuple[int, int]]] | None = None,
    seed: int | None = None,
) -> tuple[MetricReport, list[dict]]:
    """Compute the requested metrics for each {id, system, summary} record.

    Per-item failures (parse errors, missing references, empty texts) are
    recorded and the batch continues. LLM-backed metrics require a gateway
    and backend_id.
    """
    for metric in metrics:
        if metric not in KNOWN_EVAL_METRICS:
            raise ValueError(f"unknown metric {metric!r}; known: {KNOWN_EVAL_METRICS}")
    needs_gateway = {"ceonp", "rater", "llmscore"} & set(metrics)
    if needs_gateway and (gateway is None or backend_id is None):
        raise ValueError(f"metrics {sorted(needs_gateway)} need a gateway and backend_id")

    docs = corpus.by_id()
    report = MetricReport()
    errors: list[dict] = []

    def record_error(doc_id: str, system: str, metric: str, exc: Exception) -> None:
        errors.append({"id": doc_id, "system": system, "metric": metric,
                       "error": str(exc)})

    for item in summaries:
        doc_id = item["id"]
        system = item["system"]
        text = item["summary"]
        doc = docs.get(doc_id)
        if doc is None:
            errors.append({"id": doc_id, "system": system, "metric": "*",
                           "error": "document not in reference corpus"})
            continue
        if "cli" in metrics:
            try:
                report.add(doc_id, system, MetricValue(
                    "CLI", coleman_liau(text), METRIC_ORIENTATION["CLI"]))
            except EmptyTextError as exc:
                record_error(doc_id, system, "CLI", exc)
        if "rouge" in metrics:
            reference = doc.lay_summary
            if not reference:
                record_error(doc_id, system, "R1",
                             ValueError("no lay_summary reference"))
            else:
                f1s = {}
                for metric_id, score in (
                    ("R1", rouge_n(text, reference, 1)),
                    ("R2", rouge_n(text, reference, 2)),
                    ("RL", rouge_l(text, reference)),
                ):
                    f1s[metric_id] = score.f1
                    report.add(doc_id, system, MetricValue(
                        metric_id, score.f1, METRIC_ORIENTATION[metric_id]))
                report.add(doc_id, system, MetricValue(
                    "RougeGeoMean",
                    rouge_geometric_mean(f1s["R1"], f1s["R2"], f1s["RL"]),
                    METRIC_ORIENTATION["RougeGeoMean"]))
        if "ceonp" in metrics:
            spans = np_spans_by_id.get(doc_id) if np_spans_by_id else None
            try:
                value = ceonp(text, gateway, backend_id, np_spans=spans)
                report.add(doc_id, system, MetricValue(
                    "CEoNP", value, METRIC_ORIENTATION["CEoNP"],
                    {"backend_id": backend_id}))
            except NoNounPhrasesError as exc:
                record_error(doc_id, system, "CEoNP", exc)
        if "rater" in metrics:
            metric_id = rater_metric_id(backend_id)
            try:
                value = llm_rater(text, gateway, backend_id, seed=seed)
                report.add(doc_id, system, MetricValue(
                    metric_id, value, METRIC_ORIENTATION[metric_id],
                    {"backend_id": backend_id}))
            except (RaterParseError, ValueError) as exc:
                record_error(doc_id, system, metric_id, exc)
        if "llmscore" in metrics:
            try:
                score = llm_score(doc.article, text, gateway, backend_id,
                                  budgets=budgets, tokenizer=tokenizer)
                report.add(doc_id, system, MetricValue(
                    "LLMScore", score.total, METRIC_ORIENTATION["LLMScore"],
                    {"backend_id": backend_id, "normalized": False}))
                report.add(doc_id, system, MetricValue(
                    "LLMScore", score.per_token, METRIC_ORIENTATION["LLMScore"],
                    {"backend_id": backend_id, "normalized": True}),
                    variant="normalized")
            except ValueError as exc:
                record_error(doc_id, system, "LLMScore", exc)
    return report, errors
