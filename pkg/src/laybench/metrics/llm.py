"""Prompt-based layness rating and instruction-conditioned scoring."""

from __future__ import annotations

import re
from dataclasses import dataclass

from laybench.corpus import Tokenizer, TokenBudget, DEFAULT_TOKENIZER, truncate_tokens
from laybench.llmgate import ChatRequest, Gateway, ScoreRequest
from laybench.prompts import render

__all__ = ["RaterParseError", "llm_rater", "LlmScore", "llm_score"]

_INT_RE = re.compile(r"\d+")


class RaterParseError(ValueError):
    """No in-range mark found in the model's reply after a re-ask."""


def _parse_mark(text: str) -> int | None:
    for match in _INT_RE.finditer(text):
        value = int(match.group())
        if 1 <= value <= 10:
            return value
    return None


def llm_rater(summary: str, gateway: Gateway, backend_id: str, *,
              temperature: float = 0.0, seed: int | None = None) -> float:
    """10 minus the model's 1-10 layness mark, so lower means more lay.

    One re-ask (with a bumped seed, so a fresh sample is drawn even through
    the cache) on parse failure; a second failure raises RaterParseError.
    """
    if not summary:
        raise ValueError("summary must be non-empty")
    prompt = render("Rater", {"Summary": summary})
    replies = []
    for attempt_seed in (seed, (seed or 0) + 1):
        response = gateway.complete(ChatRequest.user(
            backend_id, prompt, temperature=temperature,
            max_output_tokens=16, seed=attempt_seed))
        mark = _parse_mark(response.text)
        if mark is not None:
            return float(10 - mark)
        replies.append(response.text)
    raise RaterParseError(f"no mark in 1..10 found in replies: {replies!r:.200}")


@dataclass(frozen=True)
class LlmScore:
    """Negated log-likelihood of the summary after the instruction prefix."""

    total: float       # -sum of token logprobs
    per_token: float   # total / n_tokens
    n_tokens: int


def llm_score(article: str, summary: str, gateway: Gateway, backend_id: str,
              budgets: TokenBudget = TokenBudget(),
              tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> LlmScore:
    """Score the summary as the continuation of the instruction prefix.

    The article is truncated to the zero-shot budget before rendering; the
    summary itself is the scored continuation after the prefix's final
    "Summary:" line.
    """
    if not article or not summary:
        raise ValueError("article and summary must be non-empty")
    truncated = truncate_tokens(article, budgets.article_budget_zeroshot, tokenizer)
    prefix = render("ScorePrefix", {"Article": truncated}) + " "
    response = gateway.score_continuation(ScoreRequest(
        backend_id=backend_id, prefix=prefix, continuation=summary))
    logprobs = [lp for _, lp in response.token_logprobs]
    total = -sum(logprobs)
    n = len(logprobs)
    return LlmScore(total=total, per_token=total / n if n else 0.0, n_tokens=n)
