"""Assembly of a complete search engine from a catalog plus one config.

This is what both the HTTP service and the CLI build and then query; the
bundle is immutable so a rebuild can swap it atomically under readers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import catalog as cat
from .catalog import Catalog, KnowledgeBase, ModelResolver, lookup_tag_service
from .config import EngineConfig
from .errors import ConfigError
from .grammar import (
    Generator,
    SynthTriple,
    augment_synonyms,
    compile_grammar,
    generate_triples,
    load_productions,
    parse_production_file,
    save_triples,
)
from .suggest import SuggestionPool, build_suggestion_pool, suggest
from .tagger import ParserModel, save_model, train
from .vsm import RouteOutcome, SparseIndex, index_text, route, save_index

DEFAULT_FAKE_ENDPOINTS: dict[str, Mapping[str, tuple[str, Sequence[str]]]] = {}


def default_model_resolver(endpoint_id: str) -> Callable[[dict], dict]:
    """Resolve a model-strategy endpoint.

    ``fake:<name>`` endpoints answer from tables registered in
    ``DEFAULT_FAKE_ENDPOINTS``; ``http(s)://`` endpoints go over the wire with
    the documented request/response contract.
    """
    if endpoint_id.startswith("fake:"):
        table = DEFAULT_FAKE_ENDPOINTS.get(endpoint_id[len("fake:"):])
        if table is None:
            raise ConfigError(f"no fake tag service registered for {endpoint_id!r}")
        return lookup_tag_service(table)
    if endpoint_id.startswith("http://") or endpoint_id.startswith("https://"):
        import httpx

        def call(request: dict) -> dict:
            response = httpx.post(endpoint_id, json=request, timeout=5.0)
            response.raise_for_status()
            return response.json()

        return call
    raise ConfigError(f"unsupported model endpoint {endpoint_id!r}")


@dataclass(frozen=True)
class EngineState:
    config: EngineConfig
    kb: KnowledgeBase
    index: SparseIndex
    generator: Generator
    model: Optional[ParserModel]
    pool: Optional[SuggestionPool]
    signals: Mapping[str, Mapping[str, float]]
    triples: tuple[SynthTriple, ...] = ()

    @property
    def fingerprint(self) -> str:
        return self.kb.fingerprint


def _signals_from_kb(kb: KnowledgeBase, column: Optional[str]) -> dict[str, dict[str, float]]:
    if not column:
        return {}
    signals = {}
    for product in kb.products:
        try:
            signals[product.sku] = {"popularity": float(product.raw.get(column, 0) or 0)}
        except ValueError:
            signals[product.sku] = {"popularity": 0.0}
    return signals


def load_grammar(config: EngineConfig):
    if config.grammar_text:
        return parse_production_file(config.grammar_text)
    if config.grammar_path:
        return load_productions(config.grammar_path)
    raise ConfigError("config has no grammar section (grammar.file or grammar.text)")


def build_engine(
    catalog: Catalog,
    config: EngineConfig,
    train_model: bool = True,
    head_queries: Optional[Mapping[str, int]] = None,
    model_resolver: Optional[ModelResolver] = None,
) -> EngineState:
    """Full build: tag the catalog, index it, compile the grammar, generate
    the corpus, train the parser, and precompute the suggestion pool."""
    kb = cat.extract_tags(
        catalog, config.schema, config.strategies,
        model_resolver=model_resolver or default_model_resolver,
    )
    index = index_text(kb, list(config.router.fields))
    generator = compile_grammar(load_grammar(config), kb)
    signals = _signals_from_kb(kb, config.popularity_column)

    model = None
    triples: tuple[SynthTriple, ...] = ()
    if train_model:
        generated = generate_triples(
            generator, config.generation.n, config.generation.seed, config.generation.policy
        )
        augmented = augment_synonyms(generated, config.synonyms, vocab=kb.vocab)
        model = train(augmented, config.training, kb)
        triples = tuple(augmented)

    pool = None
    state = EngineState(
        config=config, kb=kb, index=index, generator=generator,
        model=model, pool=None, signals=signals, triples=triples,
    )
    if model is not None:
        counter = _result_counter(state)
        pool = build_suggestion_pool(
            generator,
            limit=config.suggestions.limit,
            head_queries=head_queries,
            result_counter=counter,
        )
        state = replace(state, pool=pool)
    return state


def _result_counter(state: EngineState) -> Callable[[str], int]:
    def count(query: str) -> int:
        outcome = run_query(state, query)
        return len(outcome.result_skus)

    return count


def run_query(
    state: EngineState, query: str, k: Optional[int] = None, engine: str = "two-tier"
) -> RouteOutcome:
    """Route a query through the engine.

    ``engine="vsm"`` forces the keyword tier by raising the confidence
    threshold past 1, which surfaces as a LowConfidence route decision.
    """
    if state.model is None:
        raise ConfigError("engine has no trained parser model")
    router = state.config.router
    if k is not None:
        router = replace(router, k=k)
    if engine == "vsm":
        # confidence is capped at 1, so any threshold above it forces the
        # keyword tier and surfaces as an honest LowConfidence decision
        router = replace(router, threshold=2.0)
    elif engine != "two-tier":
        raise ConfigError(f"unknown engine {engine!r}")
    return route(
        query, state.model, state.kb, state.index, router,
        state.config.fallback, state.signals, state.config.ranking_weights,
    )


def suggest_queries(state: EngineState, prefix: str, k: int):
    if state.pool is None:
        raise ConfigError("suggestion pool not built")
    return suggest(state.pool, prefix, k, head_blend=state.config.suggestions.head_blend)


# --- on-disk artifacts --------------------------------------------------------

KB_FILE = "kb.json"
INDEX_FILE = "index.json"
MODEL_FILE = "model.json"
TRIPLES_FILE = "triples.jsonl"


def save_engine(state: EngineState, data_dir: str | Path) -> dict[str, str]:
    out = Path(data_dir)
    out.mkdir(parents=True, exist_ok=True)
    cat.save_kb(state.kb, out / KB_FILE)
    save_index(state.index, out / INDEX_FILE)
    written = {"kb": str(out / KB_FILE), "index": str(out / INDEX_FILE)}
    if state.model is not None:
        save_model(state.model, out / MODEL_FILE)
        written["model"] = str(out / MODEL_FILE)
    if state.triples:
        save_triples(state.triples, out / TRIPLES_FILE)
        written["triples"] = str(out / TRIPLES_FILE)
    return written


def load_engine(data_dir: str | Path, config: EngineConfig) -> EngineState:
    from .grammar import load_triples
    from .tagger import load_model
    from .vsm import load_index

    base = Path(data_dir)
    kb = cat.load_kb(base / KB_FILE)
    index = load_index(base / INDEX_FILE)
    generator = compile_grammar(load_grammar(config), kb)
    model = None
    if (base / MODEL_FILE).exists():
        model = load_model(base / MODEL_FILE, expected_fingerprint=kb.fingerprint)
    triples: tuple[SynthTriple, ...] = ()
    if (base / TRIPLES_FILE).exists():
        triples = tuple(load_triples(base / TRIPLES_FILE))
    state = EngineState(
        config=config, kb=kb, index=index, generator=generator,
        model=model, pool=None, signals=_signals_from_kb(kb, config.popularity_column),
        triples=triples,
    )
    if model is not None:
        pool = build_suggestion_pool(
            generator,
            limit=config.suggestions.limit,
            result_counter=_result_counter(state),
        )
        state = replace(state, pool=pool)
    return state


def build_summary(state: EngineState, started: float) -> dict:
    return {
        "schema_version": 1,
        "products": state.kb.report.product_count,
        "untyped": state.kb.report.untyped_count,
        "model_skipped": state.kb.report.model_skipped,
        "priceless": state.kb.report.priceless_count,
        "warnings": list(state.kb.report.warnings) + list(state.generator.warnings),
        "vocab_sizes": {k: len(v) for k, v in sorted(state.kb.vocab.items())},
        "schema_fingerprint": state.fingerprint,
        "trained": state.model is not None,
        "training_triples": len(state.triples),
        "suggestion_pool": (
            len(state.pool.head) + len(state.pool.synthetic) if state.pool else 0
        ),
        "build_seconds": round(time.perf_counter() - started, 3),
    }
