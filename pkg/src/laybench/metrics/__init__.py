"""Layness and semantic similarity metrics."""

from laybench.metrics.ceonp import NoNounPhrasesError, ceonp
from laybench.metrics.llm import LlmScore, RaterParseError, llm_rater, llm_score
from laybench.metrics.readability import (
    EmptyTextError,
    coleman_liau,
    coleman_liau_from_counts,
)
from laybench.metrics.report import (
    METRIC_ORIENTATION,
    MetricReport,
    MetricValue,
    evaluate_summaries,
    rater_metric_id,
    write_metric_jsonl,
)
from laybench.metrics.rouge import (
    KERNEL_BACKEND,
    EmptyReferenceError,
    RougeScore,
    rouge_geometric_mean,
    rouge_l,
    rouge_n,
)

__all__ = [
    "KERNEL_BACKEND",
    "METRIC_ORIENTATION",
    "EmptyReferenceError",
    "EmptyTextError",
    "LlmScore",
    "MetricReport",
    "MetricValue",
    "NoNounPhrasesError",
    "RaterParseError",
    "RougeScore",
    "ceonp",
    "coleman_liau",
    "coleman_liau_from_counts",
    "evaluate_summaries",
    "llm_rater",
    "llm_score",
    "rater_metric_id",
    "rouge_geometric_mean",
    "rouge_l",
    "rouge_n",
    "write_metric_jsonl",
]
