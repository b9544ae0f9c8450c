"""Cross entropy of noun phrases: mean masked-prediction CE over the NPs.

Each noun phrase is masked on its own (one scoring call per phrase); the
backend returns the mean cross entropy over the masked tokens, and the
metric is the arithmetic mean of those per-phrase values.
"""

from __future__ import annotations

from typing import Sequence

from laybench.llmgate import Gateway, MaskScoreRequest
from laybench.textseg import extract_noun_phrases

__all__ = ["NoNounPhrasesError", "ceonp"]


class NoNounPhrasesError(ValueError):
    """Document yields no noun phrases to mask."""


def ceonp(document: str, gateway: Gateway, backend_id: str,
          np_spans: Sequence[tuple[int, int]] | None = None) -> float:
    """Mean per-phrase masked cross entropy of `document`.

    np_spans overrides the bundled chunker (e.g. spans from a sidecar
    produced by a full parser).
    """
    if np_spans is None:
        np_spans = [(s.start, s.end) for s in extract_noun_phrases(document)]
    if not np_spans:
        raise NoNounPhrasesError("no noun phrases")
    values: list[float] = []
    for start, end in np_spans:
        response = gateway.score_masked(MaskScoreRequest(
            backend_id=backend_id, text=document, spans=((start, end),)))
        values.append(response.span_ce[0])
    return sum(values) / len(values)
