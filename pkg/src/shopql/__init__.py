"""shopql: product search where queries run as programs.

A catalog becomes a symbolic knowledge base; an NP grammar over its
vocabularies generates ⟨query, logical form, result set⟩ triples; a sequence
tagger trained on them parses live queries into forms; forms compile to
executable plans with a sortal-preserving fallback ladder; and a BM25 tier
catches whatever cannot be parsed.
"""

from .catalog import (
    Catalog,
    ConfigStrategy,
    HeuristicStrategy,
    KnowledgeBase,
    ModelStrategy,
    Product,
    TagSchema,
    extract_tags,
    heuristic_first_overlap,
    load_catalog,
    vocabulary,
)
from .config import EngineConfig, load_engine_config, parse_engine_config
from .engine import EngineState, build_engine, load_engine, run_query, save_engine
from .forms import Comparison, LogicalForm, Predicate, linear_scan
from .grammar import (
    Generator,
    Production,
    SynthTriple,
    augment_synonyms,
    compile_grammar,
    generate_triples,
    load_productions,
    parse_production_file,
)
from .harness import (
    ComparisonReport,
    EngineComponents,
    FixtureSpec,
    QueryDistribution,
    compare_engines,
    fit_powerlaw,
    make_fixture_catalog,
    sample_query_stream,
)
from .plans import (
    FallbackPolicy,
    FallbackTrace,
    QueryPlan,
    RankedResult,
    compile_form,
    execute,
    execute_with_fallback,
    explain,
    rank,
)
from .suggest import SuggestionEntry, build_suggestion_pool, suggest
from .tagger import (
    ParseFailure,
    ParseResult,
    ParserModel,
    TrainingConfig,
    evaluate,
    parse,
    train,
)
from .vsm import RouteDecision, RouterConfig, SparseIndex, index_text, route, search_bm25

__version__ = "0.1.0"
