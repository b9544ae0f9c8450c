"""Explain stage, augmented-input assembly, zero-shot summarisation and
resumable batch drivers.

Batch outputs are a pure function of (corpus, prompt version, backend
responses, seed, budgets): records are written in input order, reruns with
a warm cache are byte-identical, and partially written outputs are resumed
rather than recomputed.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from laybench.corpus import (
    Corpus,
    DEFAULT_TOKENIZER,
    Document,
    TokenBudget,
    Tokenizer,
    truncate_tokens,
)
from laybench.llmgate import ChatRequest, Gateway, GatewayError
from laybench.prompts import prompt_version, render

__all__ = [
    "SEPARATOR",
    "SUMMARY_SYSTEMS",
    "AugmentedDocument",
    "GeneratedSummary",
    "ExplanationResult",
    "BatchConfig",
    "BatchOutcome",
    "classify_system",
    "explain",
    "augment",
    "zero_shot_summarise",
    "run_batch",
    "load_stage_records",
    "load_summaries_jsonl",
]

logger = logging.getLogger(__name__)

# Augmented inputs are explanation-first; the tag keeps the boundary
# auditable in exported training files.
SEPARATOR = "\n\n[ARTICLE]\n\n"

SUMMARY_SYSTEMS = ("ZS_GPT_class", "ZS_Vicuna_class", "Target", "External")


def classify_system(backend_id: str) -> str:
    lowered = backend_id.lower()
    if "vicuna" in lowered:
        return "ZS_Vicuna_class"
    if "gpt" in lowered:
        return "ZS_GPT_class"
    return "External"


@dataclass(frozen=True)
class ExplanationResult:
    text: str
    refusal: bool = False


@dataclass(frozen=True)
class AugmentedDocument:
    document: Document
    explanation: str
    augmented_input: str
    budgets_used: TokenBudget
    backend_id: str
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class GeneratedSummary:
    document_id: str
    system: str
    text: str
    backend_id: str | None = None

    def __post_init__(self):
        if self.system not in SUMMARY_SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.system != "Target" and not self.text:
            raise ValueError("machine summaries must be non-empty")


def explain(abstract: str, gateway: Gateway, backend_id: str, *,
            temperature: float = 0.0, max_output_tokens: int = 1024,
            seed: int | None = None) -> ExplanationResult:
    """Ask the backend for background explanations of the abstract's terms."""
    if not abstract:
        raise ValueError("abstract must be non-empty")
    prompt = render("Explain", {"Abstract": abstract})
    response = gateway.complete(ChatRequest.user(
        backend_id, prompt, temperature=temperature,
        max_output_tokens=max_output_tokens, seed=seed))
    if response.finish_reason == "refusal":
        return ExplanationResult(text="", refusal=True)
    return ExplanationResult(text=response.text)


def augment(doc: Document, explanation: str, budgets: TokenBudget = TokenBudget(),
            tokenizer: Tokenizer = DEFAULT_TOKENIZER, *,
            backend_id: str = "", flags: tuple[str, ...] = ()) -> AugmentedDocument:
    """Join the truncated explanation and article, explanation first.

    A flagged-empty explanation falls back to the bare article (truncated
    to the full model context) so dataset cardinality stays stable.
    """
    if explanation:
        truncated_explanation = truncate_tokens(
            explanation, budgets.explanation_budget, tokenizer)
        truncated_article = truncate_tokens(
            doc.article, budgets.article_budget_sft, tokenizer)
        augmented = truncated_explanation + SEPARATOR + truncated_article
    else:
        truncated_explanation = ""
        augmented = truncate_tokens(doc.article, budgets.model_context, tokenizer)
        if "no_explanation" not in flags:
            flags = flags + ("no_explanation",)
    return AugmentedDocument(
        document=doc,
        explanation=truncated_explanation,
        augmented_input=augmented,
        budgets_used=budgets,
        backend_id=backend_id,
        flags=flags,
    )


def zero_shot_summarise(article: str, gateway: Gateway, backend_id: str,
                        budgets: TokenBudget = TokenBudget(),
                        tokenizer: Tokenizer = DEFAULT_TOKENIZER, *,
                        document_id: str = "", system: str | None = None,
                        temperature: float = 0.0, max_output_tokens: int = 1024,
                        seed: int | None = None) -> GeneratedSummary:
    """Summarise the (1024-token-truncated) article in one zero-shot prompt."""
    if not article:
        raise ValueError("article must be non-empty")
    truncated = truncate_tokens(article, budgets.article_budget_zeroshot, tokenizer)
    prompt = render("ZeroShotLS", {"Article": truncated})
    response = gateway.complete(ChatRequest.user(
        backend_id, prompt, temperature=temperature,
        max_output_tokens=max_output_tokens, seed=seed))
    if response.finish_reason == "refusal" or not response.text:
        raise GatewayError("backend refused the summarisation request")
    return GeneratedSummary(
        document_id=document_id, system=system or classify_system(backend_id),
        text=response.text, backend_id=backend_id)


@dataclass(frozen=True)
class BatchConfig:
    gateway: Gateway
    backend_id: str
    out_dir: Path
    budgets: TokenBudget = TokenBudget()
    tokenizer: Tokenizer = DEFAULT_TOKENIZER
    temperature: float = 0.0
    seed: int | None = None
    parallelism: int = 4
    system: str | None = None  # zeroshot output label; derived when absent


@dataclass(frozen=True)
class BatchOutcome:
    stage: str
    output_path: Path
    manifest_path: Path
    processed: int
    skipped: int
    failures: dict[str, str]


STAGES = ("explain", "augment", "zeroshot")


def _read_existing_ids(path: Path) -> set[str]:
    if not path.exists():
        return set()
    ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ids.add(json.loads(line)["id"])
    return ids


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True)


def run_batch(corpus: Corpus, stage: str, config: BatchConfig,
              explanations: dict[str, dict] | None = None) -> BatchOutcome:
    """Process every document through one stage, resumably.

    Already-present output ids are skipped; per-document failures are
    recorded in the manifest without aborting the batch. The augment stage
    takes the explain stage's records via `explanations`.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; known: {STAGES}")
    if stage == "augment" and explanations is None:
        raise ValueError("augment stage needs the explain stage's records")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    output_path = out_dir / f"{stage}.jsonl"
    manifest_path = out_dir / f"{stage}.manifest.json"

    existing = _read_existing_ids(output_path)
    pending = [doc for doc in corpus.documents if doc.id not in existing]
    statuses: dict[str, str] = {doc_id: "ok" for doc_id in existing}
    failures: dict[str, str] = {}

    worker = _stage_worker(stage, config, explanations)
    results: dict[str, dict | Exception] = {}
    if pending:
        with ThreadPoolExecutor(max_workers=max(config.parallelism, 1)) as pool:
            futures = {doc.id: pool.submit(worker, doc) for doc in pending}
            for doc in pending:
                try:
                    results[doc.id] = futures[doc.id].result()
                except Exception as exc:  # isolate per-document failures
                    results[doc.id] = exc

    processed = 0
    with open(output_path, "a", encoding="utf-8", newline="\n") as fh:
        for doc in pending:
            outcome = results[doc.id]
            if isinstance(outcome, Exception):
                failures[doc.id] = str(outcome)
                statuses[doc.id] = f"error: {outcome}"
                logger.warning("%s: %s failed: %s", stage, doc.id, outcome)
                continue
            statuses[doc.id] = outcome.pop("_status", "ok")
            fh.write(_dump(outcome))
            fh.write("\n")
            processed += 1

    manifest = {
        "stage": stage,
        "backend_id": config.backend_id,
        "prompt_version": prompt_version(),
        "budgets": {
            "explanation_budget": config.budgets.explanation_budget,
            "article_budget_sft": config.budgets.article_budget_sft,
            "article_budget_zeroshot": config.budgets.article_budget_zeroshot,
            "model_context": config.budgets.model_context,
        },
        "tokenizer": config.tokenizer.name,
        "temperature": config.temperature,
        "seed": config.seed,
        "corpus": corpus.name,
        "statuses": dict(sorted(statuses.items())),
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    return BatchOutcome(stage=stage, output_path=output_path,
                        manifest_path=manifest_path, processed=processed,
                        skipped=len(existing), failures=failures)


def _stage_worker(stage: str, config: BatchConfig,
                  explanations: dict[str, dict] | None) -> Callable[[Document], dict]:
    if stage == "explain":
        def work(doc: Document) -> dict:
            result = explain(doc.abstract, config.gateway, config.backend_id,
                             temperature=config.temperature, seed=config.seed)
            record = {"id": doc.id, "explanation": result.text,
                      "flags": ["refusal"] if result.refusal else []}
            if result.refusal:
                record["_status"] = "refusal"
            return record
        return work

    if stage == "augment":
        def work(doc: Document) -> dict:
            entry = explanations.get(doc.id)
            if entry is None:
                raise ValueError("no explanation record for this document")
            flags = tuple(entry.get("flags", []))
            augmented = augment(doc, entry.get("explanation", ""),
                                config.budgets, config.tokenizer,
                                backend_id=config.backend_id, flags=flags)
            return {
                "id": doc.id,
                "article": doc.article,
                "abstract": doc.abstract,
                "lay_summary": doc.lay_summary,
                "split": doc.split,
                "explanation": augmented.explanation,
                "augmented_input": augmented.augmented_input,
                "flags": list(augmented.flags),
            }
        return work

    def work(doc: Document) -> dict:
        summary = zero_shot_summarise(
            doc.article, config.gateway, config.backend_id,
            config.budgets, config.tokenizer, document_id=doc.id,
            system=config.system, temperature=config.temperature,
            seed=config.seed)
        return {"id": doc.id, "system": summary.system, "summary": summary.text}
    return work


def load_stage_records(path: str | Path) -> dict[str, dict]:
    """Stage output JSONL keyed by document id."""
    records: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                records[record["id"]] = record
    return records


def load_summaries_jsonl(path: str | Path) -> list[dict]:
    """Summary export records: {"id", "system", "summary"} per line."""
    out: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            for key in ("id", "system", "summary"):
                if key not in record:
                    raise ValueError(f"{path}:{line_no}: missing {key!r}")
            out.append(record)
    return out
