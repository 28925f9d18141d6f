"""Sparse BM25 retrieval tier and the two-tier router.

The index covers raw catalog text fields (not the extracted tags), so the
keyword tier stays genuinely independent from the parsing tier. The router
always tries to parse first; keyword retrieval is the safety net for parse
failures, low-confidence parses, sortal-less forms and programs that stay
empty even after the fallback ladder.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .catalog import KnowledgeBase
from .errors import ConfigError, SchemaMismatchError
from .plans import FallbackPolicy, FallbackTrace, compile_form, execute_with_fallback, rank
from .tagger import ParseFailure, ParseResult, ParserModel, parse
from .text import tokenize


@dataclass(frozen=True)
class SparseIndex:
    postings: Mapping[str, tuple[tuple[str, int], ...]]  # term -> ((sku, tf), ...)
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    doc_count: int
    k1: float
    b: float
    fields: tuple[str, ...]
    schema_fingerprint: str

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.b <= 0:
            raise ConfigError("BM25 parameters k1 and b must be positive")


def index_text(
    kb: KnowledgeBase,
    fields: Sequence[str],
    k1: float = 1.2,
    b: float = 0.75,
) -> SparseIndex:
    """Index the concatenation of the given raw fields per product."""
    if not fields:
        raise ConfigError("index_text needs at least one field")
    available = set()
    for product in kb.products:
        available.update(product.raw.keys())
    missing = [f for f in fields if f not in available]
    if missing:
        raise ConfigError(f"fields not present in product raw data: {missing}")

    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for product in kb.products:
        tokens = tokenize(" ".join(product.raw.get(f, "") for f in fields))
        doc_lengths[product.sku] = len(tokens)
        for token in tokens:
            row = postings.setdefault(token, {})
            row[product.sku] = row.get(product.sku, 0) + 1

    n = len(kb.products)
    avg = sum(doc_lengths.values()) / n if n else 0.0
    return SparseIndex(
        postings={t: tuple(sorted(row.items())) for t, row in sorted(postings.items())},
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=n,
        k1=k1,
        b=b,
        fields=tuple(fields),
        schema_fingerprint=kb.fingerprint,
    )


def bm25_idf(doc_count: int, doc_freq: int) -> float:
    return math.log(1.0 + (doc_count - doc_freq + 0.5) / (doc_freq + 0.5))


def search_bm25(
    index: SparseIndex, query: str, k: int
) -> list[tuple[str, float]]:
    """Top-k documents by BM25 score, descending; SKU breaks score ties.

    A document scores only if it shares at least one term with the query;
    repeated query terms contribute once per occurrence.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores: dict[str, float] = {}
    for term in tokenize(query):
        entry = index.postings.get(term)
        if not entry:
            continue
        idf = bm25_idf(index.doc_count, len(entry))
        for sku, tf in entry:
            dl = index.doc_lengths[sku]
            norm = index.k1 * (1 - index.b + index.b * dl / index.avg_doc_length)
            scores[sku] = scores.get(sku, 0.0) + idf * (tf * (index.k1 + 1)) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


@dataclass(frozen=True)
class RouteDecision:
    path: str  # "PARSED" | "VSM_FALLBACK"
    reason: Optional[dict] = None  # absent on PARSED decisions

    def __post_init__(self) -> None:
        if self.path == "PARSED" and self.reason is not None:
            raise ValueError("PARSED decisions carry no reason")


@dataclass(frozen=True)
class RouterConfig:
    threshold: float = 0.5
    k: int = 10
    fields: tuple[str, ...] = ("Name", "Description")


@dataclass(frozen=True)
class RoutedHit:
    sku: str
    position: int
    tier: Optional[int] = None  # parsed path only
    score: Optional[float] = None  # keyword path only


@dataclass(frozen=True)
class RouteOutcome:
    hits: tuple[RoutedHit, ...]
    decision: RouteDecision
    trace: Optional[FallbackTrace]
    parse: Optional[ParseResult]
    sql_text: Optional[str] = None
    # full answer of the executed program (PARSED) or the returned hits (VSM);
    # hits are capped at config.k, this is not
    result_skus: frozenset[str] = frozenset()
    timings_us: Mapping[str, int] = field(default_factory=dict)


def route(
    query: str,
    model: ParserModel,
    kb: KnowledgeBase,
    index: SparseIndex,
    config: RouterConfig,
    policy: Optional[FallbackPolicy] = None,
    signals: Optional[Mapping[str, Mapping[str, float]]] = None,
    weights: Optional[Mapping[str, float]] = None,
) -> RouteOutcome:
    """Prefer the parsing path; degrade to keyword retrieval gracefully.

    Total over query strings: any input yields (possibly empty) results plus
    a decision. Component fingerprints must agree, otherwise the deployment
    itself is broken and we fail loudly.
    """
    if not (model.schema_fingerprint == kb.fingerprint == index.schema_fingerprint):
        raise SchemaMismatchError(
            "router components disagree on the knowledge-base schema: "
            f"model={model.schema_fingerprint} kb={kb.fingerprint} "
            f"index={index.schema_fingerprint}"
        )
    signals = signals or {}
    weights = weights if weights is not None else {"popularity": 1.0}
    timings: dict[str, int] = {"parse_us": 0, "execute_us": 0, "rank_us": 0}

    started = time.perf_counter_ns()
    parse_result: ParseResult | ParseFailure
    try:
        parse_result = parse(model, query)
    except ValueError:
        parse_result = ParseFailure(reason="empty query")
    timings["parse_us"] = (time.perf_counter_ns() - started) // 1000

    def vsm_outcome(reason: dict, trace=None, parsed=None) -> RouteOutcome:
        t0 = time.perf_counter_ns()
        ranked = search_bm25(index, query, config.k) if tokenize(query) else []
        timings["execute_us"] = (time.perf_counter_ns() - t0) // 1000
        hits = tuple(
            RoutedHit(sku=sku, position=i, score=score)
            for i, (sku, score) in enumerate(ranked, start=1)
        )
        return RouteOutcome(
            hits=hits,
            decision=RouteDecision(path="VSM_FALLBACK", reason=reason),
            trace=trace,
            parse=parsed,
            sql_text=None,
            result_skus=frozenset(h.sku for h in hits),
            timings_us=timings,
        )

    if isinstance(parse_result, ParseFailure):
        return vsm_outcome({"kind": "ParseFailure", "detail": parse_result.reason})
    if parse_result.confidence < config.threshold:
        return vsm_outcome(
            {
                "kind": "LowConfidence",
                "threshold": config.threshold,
                "value": parse_result.confidence,
            },
            parsed=parse_result,
        )
    if parse_result.form.sortal is None:
        return vsm_outcome(
            {"kind": "ParseFailure", "detail": "parsed form has no sortal"},
            parsed=parse_result,
        )

    t0 = time.perf_counter_ns()
    skus, trace = execute_with_fallback(parse_result.form, kb, policy)
    timings["execute_us"] = (time.perf_counter_ns() - t0) // 1000
    if not skus:
        return vsm_outcome({"kind": "EmptyAfterFallback"}, trace=trace, parsed=parse_result)

    t0 = time.perf_counter_ns()
    tier = len(trace.steps)
    ranked_results = rank(skus, {sku: tier for sku in skus}, signals, weights)
    timings["rank_us"] = (time.perf_counter_ns() - t0) // 1000
    hits = tuple(
        RoutedHit(sku=r.sku, position=r.final_position, tier=r.relevance_tier)
        for r in ranked_results[: config.k]
    )
    sql = compile_form(parse_result.form, kb.fingerprint).sql_text
    return RouteOutcome(
        hits=hits,
        decision=RouteDecision(path="PARSED"),
        trace=trace,
        parse=parse_result,
        sql_text=sql,
        result_skus=skus,
        timings_us=timings,
    )


# --- index snapshot ----------------------------------------------------------

def index_to_dict(index: SparseIndex) -> dict:
    return {
        "postings": {t: [[sku, tf] for sku, tf in row] for t, row in index.postings.items()},
        "doc_lengths": dict(index.doc_lengths),
        "avg_doc_length": index.avg_doc_length,
        "doc_count": index.doc_count,
        "k1": index.k1,
        "b": index.b,
        "fields": list(index.fields),
        "schema_fingerprint": index.schema_fingerprint,
    }


def index_from_dict(data: dict) -> SparseIndex:
    return SparseIndex(
        postings={
            t: tuple((sku, tf) for sku, tf in row) for t, row in data["postings"].items()
        },
        doc_lengths=data["doc_lengths"],
        avg_doc_length=data["avg_doc_length"],
        doc_count=data["doc_count"],
        k1=data["k1"],
        b=data["b"],
        fields=tuple(data["fields"]),
        schema_fingerprint=data["schema_fingerprint"],
    )


def save_index(index: SparseIndex, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(index_to_dict(index), sort_keys=True, separators=(",", ":")),
        encoding="utf-8",
    )


def load_index(path: str | Path) -> SparseIndex:
    return index_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
