"""Dataset model, JSONL ingestion, corpus statistics, token budgets."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Protocol

from laybench.textseg import Span, split_words

__all__ = [
    "Document",
    "Corpus",
    "TokenBudget",
    "CorpusStats",
    "CorpusError",
    "CorpusFormatError",
    "DuplicateIdError",
    "Tokenizer",
    "WordPunctTokenizer",
    "token_count",
    "truncate_tokens",
    "load_jsonl",
    "write_jsonl",
    "corpus_stats",
    "synthetic_corpus_path",
]

DATASET_TAGS = ("PLOS", "eLife", "custom")
SPLITS = ("train", "val", "test")


class CorpusError(Exception):
    """Base error for dataset loading and validation."""


class CorpusFormatError(CorpusError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class DuplicateIdError(CorpusError):
    def __init__(self, doc_id: str, first_line: int, second_line: int):
        super().__init__(
            f"duplicate document id {doc_id!r} on lines {first_line} and {second_line}"
        )
        self.doc_id = doc_id
        self.lines = (first_line, second_line)


@dataclass(frozen=True)
class Document:
    id: str
    article: str
    abstract: str
    lay_summary: str | None = None
    dataset_tag: str = "custom"
    split: str = "train"

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.article:
            raise ValueError(f"document {self.id!r}: article must be non-empty")
        if not self.abstract:
            raise ValueError(f"document {self.id!r}: abstract must be non-empty")
        if self.dataset_tag not in DATASET_TAGS:
            raise ValueError(f"unknown dataset_tag {self.dataset_tag!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class Corpus:
    name: str
    documents: tuple[Document, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DuplicateIdError(doc.id, -1, -1)
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def get(self, doc_id: str) -> Document | None:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        return None

    def by_id(self) -> dict[str, Document]:
        return {doc.id: doc for doc in self.documents}

    def filter_split(self, split: str) -> "Corpus":
        return Corpus(self.name, tuple(d for d in self.documents if d.split == split))


@dataclass(frozen=True)
class TokenBudget:
    """Subword/word budgets for assembling model inputs."""

    explanation_budget: int = 320
    article_budget_sft: int = 700
    article_budget_zeroshot: int = 1024
    model_context: int = 1024

    def __post_init__(self):
        for name in ("explanation_budget", "article_budget_sft",
                     "article_budget_zeroshot", "model_context"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


class Tokenizer(Protocol):
    """Pluggable token counter; the bundled default is word+punctuation."""

    name: str

    def spans(self, text: str) -> list[Span]: ...


class WordPunctTokenizer:
    """Whitespace-plus-punctuation tokens: word runs and single marks."""

    _TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*|[^\w\s]")

    name = "word-punct-v1"

    def spans(self, text: str) -> list[Span]:
        return [Span(m.start(), m.end(), m.group()) for m in self._TOKEN_RE.finditer(text)]


DEFAULT_TOKENIZER = WordPunctTokenizer()


def token_count(text: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> int:
    return len(tokenizer.spans(text))


def truncate_tokens(text: str, budget: int, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> str:
    """Head truncation: cut at the end of the budget-th token.

    The result re-tokenizes to the first `budget` tokens of the input, so
    the operation is idempotent and never exceeds the budget.
    """
    if budget <= 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    spans = tokenizer.spans(text)
    if len(spans) <= budget:
        return text
    return text[: spans[budget - 1].end]


def _normalize(text: str | None) -> str | None:
    return None if text is None else unicodedata.normalize("NFC", text)


def load_jsonl(path: str | Path, name: str | None = None,
               dataset_tag: str = "custom") -> Corpus:
    """Load a dataset JSONL file, preserving line order.

    Required per line: id, article, abstract, split; lay_summary may be a
    string or null. Texts are NFC-normalized. Duplicate ids and malformed
    lines are rejected with their line numbers.
    """
    path = Path(path)
    documents: list[Document] = []
    first_line_by_id: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(path, line_no, f"malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusFormatError(path, line_no, "line is not a JSON object")
            for key in ("id", "article", "abstract", "split"):
                if key not in record:
                    raise CorpusFormatError(path, line_no, f"missing required field {key!r}")
            doc_id = record["id"]
            if doc_id in first_line_by_id:
                raise DuplicateIdError(doc_id, first_line_by_id[doc_id], line_no)
            first_line_by_id[doc_id] = line_no
            try:
                documents.append(Document(
                    id=doc_id,
                    article=_normalize(record["article"]),
                    abstract=_normalize(record["abstract"]),
                    lay_summary=_normalize(record.get("lay_summary")),
                    dataset_tag=dataset_tag,
                    split=record["split"],
                ))
            except (ValueError, TypeError) as exc:
                raise CorpusFormatError(path, line_no, str(exc)) from exc
    return Corpus(name or path.stem, tuple(documents))


def write_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Canonical JSONL writer: fixed key order, UTF-8, trailing newline."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus.documents:
            record = {
                "id": doc.id,
                "article": doc.article,
                "abstract": doc.abstract,
                "lay_summary": doc.lay_summary,
                "split": doc.split,
            }
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def synthetic_corpus_path() -> Path:
    """Bundled 10-document corpus used by the offline end-to-end checks."""
    return Path(str(files("laybench").joinpath("data", "synthetic_corpus.jsonl")))


@dataclass(frozen=True)
class CorpusStats:
    documents: int
    mean_abstract_words: float | None
    mean_lay_summary_words: float | None


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Document count plus mean word counts over documents having the field."""
    abstract_counts = [len(split_words(d.abstract)) for d in corpus.documents]
    lay_counts = [len(split_words(d.lay_summary)) for d in corpus.documents
                  if d.lay_summary is not None]
    return CorpusStats(
        documents=len(corpus.documents),
        mean_abstract_words=(sum(abstract_counts) / len(abstract_counts)
                             if abstract_counts else None),
        mean_lay_summary_words=(sum(lay_counts) / len(lay_counts)
                                if lay_counts else None),
    )
