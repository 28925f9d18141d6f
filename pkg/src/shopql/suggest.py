"""Type-ahead suggestions.

The pool blends observed head queries (when a query log was uploaded) with
grammar-generated queries that are guaranteed to return results — synthetic
suggestions teach shoppers what the parser understands before any traffic
exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .forms import linear_scan
from .grammar import Generator, _decode_index, realize


@dataclass(frozen=True)
class SuggestionEntry:
    query: str
    source: str  # "HEAD" | "SYNTHETIC"
    result_count: int

    def __post_init__(self) -> None:
        if self.source == "SYNTHETIC" and self.result_count <= 0:
            raise ValueError("synthetic suggestions must have results")


@dataclass(frozen=True)
class SuggestionPool:
    head: tuple[SuggestionEntry, ...]  # observed-frequency order
    synthetic: tuple[SuggestionEntry, ...]  # result-count order


def build_suggestion_pool(
    generator: Generator,
    limit: int,
    head_queries: Optional[Mapping[str, int]] = None,
    result_counter: Optional[Callable[[str], int]] = None,
) -> SuggestionPool:
    """Enumerate synthetic suggestions breadth-first and fold in the head log.

    Productions with fewer slots are enumerated first (exhaustively), so the
    short queries that make useful type-ahead entries are always covered;
    only combinations with results survive. Head queries get their counts
    through ``result_counter``.
    """
    best: dict[str, int] = {}
    ordered = sorted(
        generator.compiled, key=lambda item: (len(item.domains), item.production.name)
    )
    tiers: dict[int, list] = {}
    for item in ordered:
        tiers.setdefault(len(item.domains), []).append(item)
    for _, tier in sorted(tiers.items()):
        # round-robin across same-arity productions so no single large
        # production starves the others of pool slots
        cursors = [0] * len(tier)
        while len(best) < limit and any(
            cursor < item.size for cursor, item in zip(cursors, tier)
        ):
            for i, item in enumerate(tier):
                if len(best) >= limit or cursors[i] >= item.size:
                    continue
                values = _decode_index(cursors[i], item.domains)
                cursors[i] += 1
                query, form, _ = realize(item.production, values)
                golden = linear_scan(form, generator.kb.products)
                if golden and len(golden) > best.get(query, 0):
                    best[query] = len(golden)
        if len(best) >= limit:
            break
    synthetic = tuple(
        SuggestionEntry(query=q, source="SYNTHETIC", result_count=c)
        for q, c in sorted(best.items(), key=lambda item: (-item[1], item[0]))
    )
    head: list[SuggestionEntry] = []
    if head_queries:
        for query, _freq in sorted(head_queries.items(), key=lambda i: (-i[1], i[0])):
            count = result_counter(query) if result_counter else 0
            head.append(SuggestionEntry(query=query, source="HEAD", result_count=count))
    return SuggestionPool(head=tuple(head), synthetic=synthetic)


def suggest(
    pool: SuggestionPool, prefix: str, k: int, head_blend: float = 0.5
) -> list[SuggestionEntry]:
    """Case-insensitive prefix matches.

    With a head log present, observed queries take at most ``head_blend`` of
    the k slots (frequency order) and synthetic entries fill the rest in
    result-count order; leftover slots backfill from whichever side still has
    matches. Without a log the list is synthetic-only.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    needle = prefix.lower()

    def matches(entries) -> list[SuggestionEntry]:
        return [e for e in entries if e.query.lower().startswith(needle)]

    head = matches(pool.head)
    synthetic = matches(pool.synthetic)
    head_slots = min(len(head), math.ceil(k * head_blend)) if head else 0
    out: list[SuggestionEntry] = []
    seen: set[str] = set()
    for entry in head[:head_slots] + synthetic + head[head_slots:]:
        if len(out) >= k:
            break
        if entry.query not in seen:
            seen.add(entry.query)
            out.append(entry)
    return out
