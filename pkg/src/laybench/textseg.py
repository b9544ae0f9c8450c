"""Deterministic text segmentation and rule-based noun-phrase chunking.

Everything here is regex- and lexicon-driven: identical inputs produce
identical spans on every platform, which keeps metric values reproducible
without any statistical models.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "Span",
    "TaggedToken",
    "split_sentences",
    "split_words",
    "count_letters",
    "ngrams",
    "tag_tokens",
    "extract_noun_phrases",
    "load_np_sidecar",
]


@dataclass(frozen=True)
class Span:
    """A half-open [start, end) character range plus the covered text."""

    start: int
    end: int
    text: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    @classmethod
    def from_source(cls, source: str, start: int, end: int) -> "Span":
        if end > len(source):
            raise ValueError(f"span end {end} beyond text length {len(source)}")
        return cls(start, end, source[start:end])


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    tag: str  # one of DET, ADJ, NOUN, VERB, OTHER
    span: Span


# Words are maximal alphanumeric runs; apostrophes are word-internal.
_WORD_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")
_TERMINATOR_RE = re.compile(r"[.!?]+")

# Title/reference abbreviations whose trailing period does not end a sentence.
_ABBREVIATIONS = frozenset({
    "dr", "mr", "mrs", "ms", "prof", "st", "no", "vs", "cf", "al",
    "fig", "figs", "eq", "eqs", "ref", "refs", "approx", "ca",
})


def split_words(text: str) -> list[Span]:
    """Word spans: maximal alphanumeric runs with internal apostrophes."""
    return [Span(m.start(), m.end(), m.group()) for m in _WORD_RE.finditer(text)]


def count_letters(word: str) -> int:
    """Number of alphabetic characters (digits and punctuation excluded)."""
    return sum(1 for ch in word if ch.isalpha())


def _guarded_abbreviation(text: str, dot_pos: int) -> bool:
    """True when the '.' at dot_pos ends an abbreviation, not a sentence."""
    i = dot_pos - 1
    if i < 0 or not (text[i].isalnum() or text[i] in "'’"):
        return False
    j = i
    while j >= 0 and (text[j].isalnum() or text[j] in "'’"):
        j -= 1
    word = text[j + 1 : i + 1]
    if len(word) == 1 and word.isalpha():
        # Initials such as "E. coli"; lowercase singles only continue an
        # abbreviation chain ("e.g.").
        return word.isupper() or (j >= 0 and text[j] == ".")
    return word.lower() in _ABBREVIATIONS


def split_sentences(text: str) -> list[Span]:
    """Sentence spans; boundaries at ./!/? before whitespace or end of text.

    Dots after known abbreviations or single initials do not split. Text
    without any terminator is one sentence.
    """
    boundaries: list[int] = []
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        if end < len(text) and not text[end].isspace():
            continue
        if m.group().startswith(".") and len(m.group()) == 1 and _guarded_abbreviation(text, m.start()):
            continue
        boundaries.append(end)

    spans: list[Span] = []
    cursor = 0
    for b in boundaries:
        segment = text[cursor:b]
        stripped = segment.strip()
        if stripped:
            start = cursor + (len(segment) - len(segment.lstrip()))
            spans.append(Span(start, start + len(stripped), stripped))
        cursor = b
    tail = text[cursor:]
    if tail.strip():
        start = cursor + (len(tail) - len(tail.lstrip()))
        stripped = tail.strip()
        spans.append(Span(start, start + len(stripped), stripped))
    return spans


def ngrams(tokens: list, n: int) -> Counter:
    """Multiset of n-grams (tuples) with multiplicity; max(0, len-n+1) items."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# Closed-class lexicon. Pronouns and function words tag OTHER so they can
# never seed or join a noun phrase.
_DETERMINERS = frozenset({
    "the", "a", "an", "this", "that", "these", "those", "each", "every",
    "some", "any", "no", "both", "either", "neither", "another", "all",
    "its", "his", "her", "their", "our", "your", "my",
})
_PRONOUNS = frozenset({
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "them", "us",
    "who", "whom", "which", "what", "itself", "himself", "herself",
    "themselves", "something", "anything", "nothing", "everything",
    "someone", "anyone", "everyone",
})
_FUNCTION_WORDS = frozenset({
    "and", "or", "but", "nor", "so", "yet", "if", "then", "else", "when",
    "while", "because", "although", "though", "of", "in", "on", "at", "by",
    "for", "with", "to", "from", "as", "into", "onto", "over", "under",
    "between", "among", "through", "during", "before", "after", "above",
    "below", "up", "down", "out", "off", "about", "against", "than", "via",
    "per", "not", "also", "very", "too", "only", "just", "there", "here",
    "where", "how", "why", "whether", "however", "therefore", "thus",
    "moreover", "furthermore", "such",
})
_COMMON_VERBS = frozenset({
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does",
    "did", "have", "has", "had", "will", "would", "can", "could", "may",
    "might", "must", "shall", "should", "go", "goes", "went", "gone",
    "come", "came", "make", "makes", "made", "take", "takes", "took",
    "get", "gets", "got", "give", "gives", "gave", "find", "finds",
    "found", "say", "says", "said", "see", "sees", "saw", "seen", "know",
    "knows", "knew", "show", "shows", "use", "uses", "run", "runs", "ran",
    "grow", "grows", "grew", "become", "becomes", "became", "remain",
    "remains", "cause", "causes", "help", "helps", "lead", "leads", "led",
    "keep", "keeps", "kept", "let", "lets", "put", "puts", "mean", "means",
    "meant", "suggest", "suggests", "occur", "occurs", "leave", "leaves",
    "left", "told", "felt", "held", "sent", "lost", "met", "thought",
    "began", "fell", "heard", "read", "rose", "sat", "spoke", "stood",
    "wrote", "ate", "chose", "drew", "drove",
})
_COMMON_ADJECTIVES = frozenset({
    "red", "blue", "green", "black", "white", "big", "small", "large",
    "little", "new", "old", "young", "good", "bad", "high", "low", "long",
    "short", "great", "own", "other", "same", "different", "early", "late",
    "few", "many", "several", "more", "most", "less", "least", "first",
    "second", "third", "last", "next", "certain", "common", "rare", "main",
    "key", "major", "minor", "recent", "similar", "complex", "simple",
    "human", "present", "absent", "single", "multiple", "whole",
})

# Suffix heuristics, tried longest-first after the lexicon. Minimum stem
# lengths keep short words ("bed", "king") away from the verb rules.
_SUFFIX_RULES: tuple[tuple[str, str, int], ...] = (
    ("ology", "NOUN", 2),
    ("ation", "NOUN", 2),
    ("ities", "NOUN", 2),
    ("tion", "NOUN", 2),
    ("sion", "NOUN", 2),
    ("ness", "NOUN", 2),
    ("ment", "NOUN", 3),
    ("ance", "NOUN", 3),
    ("ence", "NOUN", 3),
    ("ship", "NOUN", 3),
    ("ity", "NOUN", 2),
    ("ism", "NOUN", 3),
    ("ical", "ADJ", 2),
    ("able", "ADJ", 2),
    ("ible", "ADJ", 2),
    ("ful", "ADJ", 3),
    ("less", "ADJ", 3),
    ("ous", "ADJ", 2),
    ("ive", "ADJ", 2),
    ("al", "ADJ", 3),
    ("ic", "ADJ", 3),
    ("ize", "VERB", 3),
    ("ized", "VERB", 3),
    ("izes", "VERB", 3),
    ("ise", "VERB", 3),
    ("ised", "VERB", 3),
    ("ify", "VERB", 3),
    ("ing", "VERB", 3),
    ("ed", "VERB", 3),
    ("ly", "OTHER", 3),
)


def _tag_word(surface: str) -> str:
    lower = surface.lower()
    if lower in _DETERMINERS:
        return "DET"
    if lower in _PRONOUNS or lower in _FUNCTION_WORDS:
        return "OTHER"
    if lower in _COMMON_VERBS:
        return "VERB"
    if lower in _COMMON_ADJECTIVES:
        return "ADJ"
    for suffix, tag, min_stem in _SUFFIX_RULES:
        if lower.endswith(suffix) and len(lower) - len(suffix) >= min_stem:
            return tag
    if lower.isdigit():
        return "OTHER"
    # Unknown content words (including capitalised terms) default to NOUN.
    return "NOUN"


def tag_tokens(text: str) -> list[TaggedToken]:
    """Deterministic lexicon/suffix tags over the word tokens of text."""
    return [TaggedToken(s.text, _tag_word(s.text), s) for s in split_words(text)]


def extract_noun_phrases(text: str) -> list[Span]:
    """Non-overlapping chunks matching DET? ADJ* NOUN+ left to right."""
    tokens = tag_tokens(text)
    phrases: list[Span] = []
    i = 0
    n = len(tokens)
    while i < n:
        j = i
        if tokens[j].tag == "DET":
            j += 1
        while j < n and tokens[j].tag == "ADJ":
            j += 1
        k = j
        while k < n and tokens[k].tag == "NOUN":
            k += 1
        if k > j:  # at least one NOUN: emit [i, k)
            phrases.append(Span.from_source(text, tokens[i].span.start, tokens[k - 1].span.end))
            i = k
        else:
            i += 1
    return phrases


def load_np_sidecar(path: str | Path) -> dict[str, list[tuple[int, int]]]:
    """Pre-extracted NP spans per document id, overriding the chunker.

    One JSON object per line: {"id": ..., "np_spans": [[start, end], ...]}.
    """
    spans_by_id: dict[str, list[tuple[int, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: malformed JSON ({exc.msg})") from exc
            spans_by_id[record["id"]] = [(int(s), int(e)) for s, e in record["np_spans"]]
    return spans_by_id
