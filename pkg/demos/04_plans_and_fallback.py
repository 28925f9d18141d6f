"""Compile logical forms into executable plans, run them, and watch the
fallback ladder keep the object type while relaxing everything else.
"""

from pathlib import Path

from shopql.catalog import extract_tags, load_catalog
from shopql.config import load_engine_config
from shopql.forms import Comparison, LogicalForm, Predicate
from shopql.harness import FixtureSpec, make_fixture_catalog
from shopql.plans import compile_form, execute, execute_with_fallback, rank

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
kb = extract_tags(
    load_catalog(ROOT / "fixtures" / "fixture_1k.csv"), config.schema, config.strategies
)

form = LogicalForm.make([
    Predicate("SORTAL", "shoes"),
    Predicate("BRAND", "prada"),
    Predicate("COLOR", "purple"),
    Comparison("PRICE", "<", 250.0),
])
plan = compile_form(form, kb.fingerprint)
print("plan nodes:", plan.nodes)
print("rendered:  ", plan.sql_text)
print("answer:    ", sorted(execute(plan, kb)) or "(empty)")

# a catalog variant with no purple shoes at all: the ladder relaxes the color
variant_path = make_fixture_catalog(
    FixtureSpec(products=400, exclude_pairs=(("shoes", "purple"),),
                ensure_pairs=(("shoes", "dark red"),)),
    seed=7,
    path=ROOT / "demos" / "_no_purple_shoes.csv",
)
variant_kb = extract_tags(load_catalog(variant_path), config.schema, config.strategies)
variant_path.unlink()

wanted = LogicalForm.make([Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple")])
skus, trace = execute_with_fallback(wanted, variant_kb, config.fallback)
print(f"\n'purple shoes' with no purple shoes in stock -> {len(skus)} results")
for step in trace.steps:
    print("  ladder step:", step)
print("  banner:", trace.message)

# ceteris paribus: popularity reorders only items of equal relevance tier
tiers = {sku: len(trace.steps) for sku in skus}
signals = {sku: {"popularity": float(variant_kb.by_sku(sku).raw["Popularity"])} for sku in skus}
ranked = rank(skus, tiers, signals, {"popularity": 1.0})
print("\nranked (tier, popularity):")
for r in ranked[:5]:
    print(f"  #{r.final_position} {r.sku} tier={r.relevance_tier} "
          f"popularity={r.rank_signals['popularity']:.0f}")
