"""ROUGE-1/2/L F1 over case-folded word tokens (no stemming).

The ROUGE-L longest-common-subsequence kernel is the hot loop when scoring
whole corpora; the compiled extension is used when available and the
pure-Python twin otherwise. benchmarks/bench_kernels.py compares the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from laybench.textseg import ngrams, split_words

try:
    from laybench._kernels import lcs_length as _lcs_length
    KERNEL_BACKEND = "compiled"
except ImportError:  # extension not built
    from laybench._kernels_py import lcs_length as _lcs_length
    KERNEL_BACKEND = "python"

__all__ = [
    "RougeScore",
    "EmptyReferenceError",
    "rouge_n",
    "rouge_l",
    "rouge_geometric_mean",
    "tokenize",
    "KERNEL_BACKEND",
]


class EmptyReferenceError(ValueError):
    """Reference text has no word tokens."""


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def tokenize(text: str) -> list[str]:
    """Case-folded word tokens used by every ROUGE variant."""
    return [span.text.lower() for span in split_words(text)]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F1."""
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReferenceError("reference has no word tokens")
    cand_grams = ngrams(cand_tokens, n)
    ref_grams = ngrams(ref_tokens, n)
    overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    cand_total = cand_grams.total()
    ref_total = ref_grams.total()
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return RougeScore(precision, recall, _f1(precision, recall))


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based precision/recall/F1 over word tokens."""
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReferenceError("reference has no word tokens")
    if not cand_tokens:
        return RougeScore(0.0, 0.0, 0.0)
    ids: dict[str, int] = {}
    cand_ids = [ids.setdefault(tok, len(ids)) for tok in cand_tokens]
    ref_ids = [ids.setdefault(tok, len(ids)) for tok in ref_tokens]
    lcs = _lcs_length(cand_ids, ref_ids)
    precision = lcs / len(cand_ids)
    recall = lcs / len(ref_ids)
    return RougeScore(precision, recall, _f1(precision, recall))


def rouge_geometric_mean(r1_f1: float, r2_f1: float, rl_f1: float) -> float:
    """Cube root of the product; 0 whenever any input is 0."""
    for value in (r1_f1, r2_f1, rl_f1):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"F1 inputs must lie in [0, 1], got {value}")
    product = r1_f1 * r2_f1 * rl_f1
    if product == 0.0:
        return 0.0
    return math.pow(product, 1.0 / 3.0)
