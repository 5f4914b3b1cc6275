"""Deterministic, offset-preserving word tokenisation.

Every non-whitespace character belongs to exactly one token, so the source
text can be reconstructed from token offsets plus inter-token whitespace.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum

APOSTROPHES = ("'", "’")

# Separators that may appear inside a number when flanked by digits ("1,000").
NUMBER_SEPARATORS = (".", ",")


class TokenKind(str, Enum):
    WORD = "word"
    NUMBER = "number"
    PUNCT = "punct"
    SYMBOL = "symbol"


@dataclass(frozen=True, slots=True)
class Token:
    start: int
    end: int
    kind: TokenKind


def tokenize(text: str) -> list[Token]:
    """Scan text into non-overlapping, sorted tokens; whitespace is skipped.

    Words are maximal letter runs; an apostrophe binds into a word when it has
    a letter on both sides ("Watson's" is one token). Numbers are maximal
    digit runs, allowing a single '.' or ',' between digits. Everything else
    is emitted one character at a time as punctuation or symbol.
    """
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalpha():
            j = i + 1
            while j < n:
                if text[j].isalpha():
                    j += 1
                elif (
                    text[j] in APOSTROPHES
                    and text[j - 1].isalpha()
                    and j + 1 < n
                    and text[j + 1].isalpha()
                ):
                    j += 1
                else:
                    break
            tokens.append(Token(i, j, TokenKind.WORD))
            i = j
        elif ch.isdecimal():
            j = i + 1
            while j < n:
                if text[j].isdecimal():
                    j += 1
                elif (
                    text[j] in NUMBER_SEPARATORS
                    and text[j - 1].isdecimal()
                    and j + 1 < n
                    and text[j + 1].isdecimal()
                ):
                    j += 1
                else:
                    break
            tokens.append(Token(i, j, TokenKind.NUMBER))
            i = j
        else:
            kind = TokenKind.PUNCT if unicodedata.category(ch).startswith("P") else TokenKind.SYMBOL
            tokens.append(Token(i, i + 1, kind))
            i += 1
    return tokens


def word_tokens(text: str) -> list[Token]:
    """Tokens that count as words: word and number kinds, punctuation excluded."""
    return [t for t in tokenize(text) if t.kind in (TokenKind.WORD, TokenKind.NUMBER)]


def count_word_tokens(text: str) -> int:
    return len(word_tokens(text))
