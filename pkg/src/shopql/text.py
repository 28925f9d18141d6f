"""Shared tokenizer and value canonicalization.

Every component that looks at text (tag extraction, query generation,
the slot tagger, the BM25 index) goes through this module, so surface
forms stay byte-identical along the whole pipeline.
"""

from __future__ import annotations

import re
from typing import Iterable

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation; decimals stay one token."""
    return _TOKEN_RE.findall(text.lower())


def is_number(token: str) -> bool:
    return bool(re.fullmatch(r"\d+(?:\.\d+)?", token))


def canonical_value(value: str) -> str:
    """Canonical tag value: lowercased, punctuation dropped, spaces collapsed."""
    return " ".join(tokenize(value))


def fold_plural(token: str, known: Iterable[str]) -> str:
    """Strip a trailing 's' when the singular is already a known value."""
    if token.endswith("s") and token[:-1] in known:
        return token[:-1]
    return token
