"""Tokenization and the shared term dictionary.

Both sides of every scoring model go through the same analyzer, so query
and document token streams line up. The tokenizer keeps maximal runs of
Unicode alphanumerics (underscore excluded), lowercases by default, drops
stopwords after lowercasing, and truncates very long tokens.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

MAX_TOKEN_LEN = 64

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Analyzer:
    """Configured tokenization: lowercase flag plus a stopword set.

    Stopwords are matched against analyzed tokens, so with lowercasing on
    (the default) the stopword entries themselves should be lowercase.
    """

    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def tokenize(self, text: str) -> list[str]:
        out = []
        for tok in _TOKEN_RE.findall(text):
            if self.lowercase:
                tok = tok.lower()
            if len(tok) > MAX_TOKEN_LEN:
                tok = tok[:MAX_TOKEN_LEN]
            if tok in self.stopwords:
                continue
            out.append(tok)
        return out


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one token per line, blank lines ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word:
                words.add(word)
    return frozenset(words)


class TermDictionary:
    """Bijective term <-> dense integer id map, ids in first-seen order."""

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._terms: list[str] = []
        self._frozen = False

    def intern(self, term: str) -> int:
        """Return the term's id, assigning the next id if unseen."""
        tid = self._ids.get(term)
        if tid is not None:
            return tid
        if self._frozen:
            raise RuntimeError(f"dictionary is frozen; cannot add term {term!r}")
        tid = len(self._terms)
        self._ids[term] = tid
        self._terms.append(term)
        return tid

    def intern_all(self, tokens: list[str]) -> list[int]:
        return [self.intern(t) for t in tokens]

    def lookup(self, term: str) -> int | None:
        """Id for a term, or None if out of vocabulary."""
        return self._ids.get(term)

    def term(self, term_id: int) -> str:
        if not 0 <= term_id < len(self._terms):
            raise KeyError(f"unknown term id {term_id}")
        return self._terms[term_id]

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __contains__(self, term: str) -> bool:
        return term in self._ids
