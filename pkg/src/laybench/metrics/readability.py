"""Coleman-Liau readability index from the bundled segmenter's counts."""

from __future__ import annotations

from laybench.textseg import count_letters, split_sentences, split_words

__all__ = ["EmptyTextError", "coleman_liau", "coleman_liau_from_counts"]


class EmptyTextError(ValueError):
    """Text has no words or no sentences."""


def coleman_liau_from_counts(letters: int, words: int, sentences: int) -> float:
    """0.0588*L - 0.296*S - 15.8 with L, S per 100 words."""
    if words < 1 or sentences < 1:
        raise EmptyTextError(
            f"need at least one word and one sentence, got {words} words, "
            f"{sentences} sentences")
    letters_per_100 = 100.0 * letters / words
    sentences_per_100 = 100.0 * sentences / words
    return 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8


def coleman_liau(text: str) -> float:
    words = split_words(text)
    if not words:
        raise EmptyTextError("text has no word tokens")
    letters = sum(count_letters(w.text) for w in words)
    sentences = split_sentences(text)
    return coleman_liau_from_counts(letters, len(words), max(len(sentences), 1))
