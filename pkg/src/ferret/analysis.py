"""Text analysis chain: tokenize -> lowercase -> stopword filter -> stem.

The analyzed terms produced here are the index vocabulary. Queries must be
analyzed with the same configuration the index was built with, otherwise
term lookups silently miss.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

__all__ = [
    "AnalyzerConfig",
    "Token",
    "tokenize",
    "analyze",
    "porter_stem",
    "load_stopwords",
    "default_stopwords",
]

# Maximal runs of Unicode alphanumerics; everything else is a separator.
# [^\W_] is exactly the str.isalnum() character class (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_ASCII_WORD_RE = re.compile(r"[a-z]+\Z")


class Token(NamedTuple):
    """An analyzed term plus the ordinal of its source token.

    Positions are assigned on the raw token stream before any filtering,
    so stopword removal leaves gaps.
    """

    term: str
    position: int


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: UTF-8, one word per line, ``#`` comments ignored."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and not word.startswith("#"):
                words.append(word.lower())
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    """The 33-word classic English list, shipped as package data."""
    text = resources.files("ferret.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


_DEFAULT_STOPWORDS = default_stopwords()


@dataclass(frozen=True)
class AnalyzerConfig:
    """Configuration of the analysis chain.

    Defaults mirror conventional English indexing: lowercase, the classic
    stopword list, Porter stemming. Analysis is deterministic for a fixed
    config; stopword filtering happens after lowercasing and before stemming.
    """

    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=lambda: _DEFAULT_STOPWORDS)
    stem: str = "porter"

    def __post_init__(self) -> None:
        if self.stem not in ("none", "porter"):
            raise ValueError(f"unknown stemmer {self.stem!r} (expected 'none' or 'porter')")
        if not isinstance(self.stopwords, frozenset):
            object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
            "stem": self.stem,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=d["lowercase"],
            stopwords=frozenset(d["stopwords"]),
            stem=d["stem"],
        )

    @classmethod
    def no_op(cls) -> "AnalyzerConfig":
        """Tokenize only; handy for toy corpora with hand counts."""
        return cls(lowercase=False, stopwords=frozenset(), stem="none")


def tokenize(text: str) -> list[Token]:
    """Split text into raw tokens with positions.

    Tokens are maximal runs of alphanumeric code points; position is the
    ordinal of the run in the text. No case folding or filtering here.
    """
    return [Token(m.group(), i) for i, m in enumerate(_TOKEN_RE.finditer(text))]


def analyze(text: str, config: AnalyzerConfig | None = None) -> list[Token]:
    """Run the full chain and return index-vocabulary terms with positions."""
    if config is None:
        config = AnalyzerConfig()
    out: list[Token] = []
    for term, pos in tokenize(text):
        if config.lowercase:
            term = term.lower()
        if term in config.stopwords:
            continue
        if config.stem == "porter":
            term = porter_stem(term)
            if not term:
                # bare "s" stems to nothing under the unguarded rules
                continue
        out.append(Token(term, pos))
    return out


# ---------------------------------------------------------------------------
# Porter stemmer, following the published 1980 algorithm. Words that are not
# lowercase ASCII-alphabetic pass through unchanged (the algorithm is defined
# over ASCII letters only).
# ---------------------------------------------------------------------------


class PorterStemmer:
    """Suffix-stripping stemmer: five ordered rule steps over a measure-based
    condition language. Within a step the longest matching suffix selects the
    rule; if its condition fails, no rule of that step applies."""

    _VOWELS = frozenset("aeiou")

    def _is_consonant(self, word: str, i: int) -> bool:
        ch = word[i]
        if ch in self._VOWELS:
            return False
        if ch == "y":
            # y is a consonant unless preceded by a consonant ("toy" vs "syzygy")
            return i == 0 or not self._is_consonant(word, i - 1)
        return True

    def _measure(self, stem: str) -> int:
        """Number of vowel->consonant transitions: [C](VC)^m[V]."""
        m = 0
        i = 0
        n = len(stem)
        while i < n and self._is_consonant(stem, i):
            i += 1
        while i < n:
            while i < n and not self._is_consonant(stem, i):
                i += 1
            if i >= n:
                break
            m += 1
            while i < n and self._is_consonant(stem, i):
                i += 1
        return m

    def _has_vowel(self, stem: str) -> bool:
        return any(not self._is_consonant(stem, i) for i in range(len(stem)))

    def _ends_double_consonant(self, word: str) -> bool:
        return (
            len(word) >= 2
            and word[-1] == word[-2]
            and self._is_consonant(word, len(word) - 1)
        )

    def _ends_cvc(self, word: str) -> bool:
        # *o: stem ends consonant-vowel-consonant, final consonant not w/x/y
        if len(word) < 3:
            return False
        return (
            self._is_consonant(word, len(word) - 3)
            and not self._is_consonant(word, len(word) - 2)
            and self._is_consonant(word, len(word) - 1)
            and word[-1] not in "wxy"
        )

    def _apply_rule_list(self, word: str, rules: list[tuple[str, str, int]]) -> str:
        """Longest matching suffix picks the rule; condition is m > threshold."""
        best = None
        for suffix, replacement, m_threshold in rules:
            if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
                best = (suffix, replacement, m_threshold)
        if best is None:
            return word
        suffix, replacement, m_threshold = best
        stem = word[: len(word) - len(suffix)]
        if self._measure(stem) > m_threshold:
            return stem + replacement
        return word

    def _step1a(self, word: str) -> str:
        if word.endswith("sses"):
            return word[:-2]
        if word.endswith("ies"):
            return word[:-2]
        if word.endswith("ss"):
            return word
        if word.endswith("s"):
            return word[:-1]
        return word

    def _step1b(self, word: str) -> str:
        # Longest of eed/ed/ing decides the rule; a failed eed condition does
        # not fall through to the ed rule ("feed" stays "feed").
        if word.endswith("eed"):
            if self._measure(word[:-3]) > 0:
                return word[:-1]
            return word
        removed = False
        if word.endswith("ed") and self._has_vowel(word[:-2]):
            word = word[:-2]
            removed = True
        elif word.endswith("ing") and self._has_vowel(word[:-3]):
            word = word[:-3]
            removed = True
        if removed:
            if word.endswith(("at", "bl", "iz")):
                return word + "e"
            if self._ends_double_consonant(word) and word[-1] not in "lsz":
                return word[:-1]
            if self._measure(word) == 1 and self._ends_cvc(word):
                return word + "e"
        return word

    def _step1c(self, word: str) -> str:
        if word.endswith("y") and self._has_vowel(word[:-1]):
            return word[:-1] + "i"
        return word

    _STEP2_RULES = [
        ("ational", "ate", 0),
        ("tional", "tion", 0),
        ("enci", "ence", 0),
        ("anci", "ance", 0),
        ("izer", "ize", 0),
        ("abli", "able", 0),
        ("alli", "al", 0),
        ("entli", "ent", 0),
        ("eli", "e", 0),
        ("ousli", "ous", 0),
        ("ization", "ize", 0),
        ("ation", "ate", 0),
        ("ator", "ate", 0),
        ("alism", "al", 0),
        ("iveness", "ive", 0),
        ("fulness", "ful", 0),
        ("ousness", "ous", 0),
        ("aliti", "al", 0),
        ("iviti", "ive", 0),
        ("biliti", "ble", 0),
    ]

    _STEP3_RULES = [
        ("icate", "ic", 0),
        ("ative", "", 0),
        ("alize", "al", 0),
        ("iciti", "ic", 0),
        ("ical", "ic", 0),
        ("ful", "", 0),
        ("ness", "", 0),
    ]

    _STEP4_RULES = [
        ("al", "", 1),
        ("ance", "", 1),
        ("ence", "", 1),
        ("er", "", 1),
        ("ic", "", 1),
        ("able", "", 1),
        ("ible", "", 1),
        ("ant", "", 1),
        ("ement", "", 1),
        ("ment", "", 1),
        ("ent", "", 1),
        ("ou", "", 1),
        ("ism", "", 1),
        ("ate", "", 1),
        ("iti", "", 1),
        ("ous", "", 1),
        ("ive", "", 1),
        ("ize", "", 1),
    ]

    def _step2(self, word: str) -> str:
        return self._apply_rule_list(word, self._STEP2_RULES)

    def _step3(self, word: str) -> str:
        return self._apply_rule_list(word, self._STEP3_RULES)

    def _step4(self, word: str) -> str:
        # No other step-4 suffix overlaps "ion", so it gets its own branch:
        # dropped only when the remaining stem ends in s or t.
        if word.endswith("ion"):
            stem = word[:-3]
            if stem.endswith(("s", "t")) and self._measure(stem) > 1:
                return stem
            return word
        return self._apply_rule_list(word, self._STEP4_RULES)

    def _step5a(self, word: str) -> str:
        if word.endswith("e"):
            stem = word[:-1]
            m = self._measure(stem)
            if m > 1:
                return stem
            if m == 1 and not self._ends_cvc(stem):
                return stem
        return word

    def _step5b(self, word: str) -> str:
        if self._measure(word) > 1 and self._ends_double_consonant(word) and word.endswith("l"):
            return word[:-1]
        return word

    def stem(self, word: str) -> str:
        if not _ASCII_WORD_RE.match(word):
            return word
        word = self._step1a(word)
        word = self._step1b(word)
        word = self._step1c(word)
        word = self._step2(word)
        word = self._step3(word)
        word = self._step4(word)
        word = self._step5a(word)
        word = self._step5b(word)
        return word


_STEMMER = PorterStemmer()


def porter_stem(word: str) -> str:
    """Stem one lowercase ASCII-alphabetic word; anything else passes through."""
    return _STEMMER.stem(word)
