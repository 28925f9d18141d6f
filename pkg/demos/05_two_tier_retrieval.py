"""The two-tier router: parse-and-execute first, BM25 as the safety net.

Also reproduces the classic keyword-tier failure: a head query for a console
retrieving branded pens, which the parsed tier is structurally unable to do.
"""

import dataclasses
from pathlib import Path

from shopql.catalog import load_catalog
from shopql.config import load_engine_config
from shopql.engine import build_engine, run_query
from shopql.vsm import search_bm25

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
config = dataclasses.replace(
    config,
    generation=dataclasses.replace(config.generation, n=2500),
    training=dataclasses.replace(config.training, epochs=3),
    suggestions=dataclasses.replace(config.suggestions, limit=300),
)
state = build_engine(load_catalog(ROOT / "fixtures" / "fixture_1k.csv"), config)
kb = state.kb

print("pure BM25 for 'nintendo switch':")
for sku, score in search_bm25(state.index, "nintendo switch", k=6):
    sortal = ",".join(kb.by_sku(sku).tags.get("SORTAL", frozenset()))
    print(f"  {sku} {score:6.2f}  {kb.by_sku(sku).raw['Name']:<28} sortal={sortal}")

print("\nrouted queries:")
for query in ["nintendo switch", "prada purple shoes", "shoes under 100", "zxqv gadget"]:
    outcome = run_query(state, query)
    reason = outcome.decision.reason or {}
    print(f"  {query!r:<22} -> {outcome.decision.path:<13} "
          f"{reason.get('kind', '')}")
    if outcome.sql_text:
        print(f"  {'':<22}    {outcome.sql_text}")
    for hit in outcome.hits[:3]:
        name = kb.by_sku(hit.sku).raw["Name"]
        marker = f"tier {hit.tier}" if hit.tier is not None else f"bm25 {hit.score:.2f}"
        print(f"  {'':<22}    #{hit.position} {name} ({marker})")
