"""Desk-scale evaluation: a power-law query stream over the grammar queries
and a side-by-side comparison of the two-tier router against pure BM25.
"""

import dataclasses
from pathlib import Path

from shopql.catalog import load_catalog
from shopql.config import load_engine_config
from shopql.engine import build_engine
from shopql.harness import (
    EngineComponents,
    compare_engines,
    fit_powerlaw,
    sample_query_stream,
    save_report,
    synthetic_query_log,
)

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
config = dataclasses.replace(
    config,
    generation=dataclasses.replace(config.generation, n=2500),
    training=dataclasses.replace(config.training, epochs=3),
    suggestions=dataclasses.replace(config.suggestions, limit=200),
)
state = build_engine(load_catalog(ROOT / "fixtures" / "fixture_1k.csv"), config)

log = synthetic_query_log(
    [t.query for t in state.triples], seed=7,
    head_queries=("nintendo switch", "prada purple shoes"),
    max_distinct=400,
)
dist = fit_powerlaw(log)
stream = sample_query_stream(dist, 20000, seed=7)
head = {q for q, _ in dist.queries[: len(dist.queries) // 20]}
head_mass = sum(1 for q in stream if q in head) / len(stream)
print(f"fitted exponent {dist.exponent:.3f}; "
      f"top 5% of distinct queries carry {head_mass:.1%} of the stream")

components = EngineComponents(
    kb=state.kb,
    model=state.model,
    index=state.index,
    router=state.config.router,
    policy=state.config.fallback,
    signals=state.signals,
    weights=state.config.ranking_weights,
    query_forms={t.query: t.form for t in state.triples},
)
report = compare_engines(stream, {t.query: t.golden for t in state.triples},
                         components, seed=7)
print()
print(report.to_text())
json_path, text_path = save_report(report, ROOT / "demos" / "_reports")
print(f"report files: {json_path.name}, {text_path.name}")
