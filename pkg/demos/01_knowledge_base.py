"""Build a symbolic knowledge base from a product catalog.

Tagging strategies run in series over the raw rows: config strategies copy
columns, the first-noun heuristic finds the object type in free text, and
everything lands in an immutable knowledge base with per-kind vocabularies
and an inverted index.
"""

from pathlib import Path

from shopql.catalog import extract_tags, heuristic_first_overlap, load_catalog, vocabulary
from shopql.config import load_engine_config

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
catalog = load_catalog(ROOT / "fixtures" / "fixture_1k.csv")
print(f"catalog: {len(catalog)} rows, columns {catalog.columns}")

kb = extract_tags(catalog, config.schema, config.strategies)
print(f"knowledge base: {kb.report.product_count} products, "
      f"{kb.report.untyped_count} untyped, fingerprint {kb.fingerprint}")

for kind in kb.schema.categorical_kinds:
    values = sorted(vocabulary(kb, kind))
    print(f"  {kind:<9} {len(values):>3} values: {', '.join(values[:6])}"
          + (" ..." if len(values) > 6 else ""))

# the heuristic in isolation: first description noun overlapping the category
example = heuristic_first_overlap(
    "Blue running shoes for men", "Footwear/shoes", sorted(vocabulary(kb, "SORTAL"))
)
print(f"\nheuristic('Blue running shoes for men', 'Footwear/shoes') -> {example}")

# the inverted index answers membership queries directly
purple_shoes = kb.inverted[("SORTAL", "shoes")] & kb.inverted[("COLOR", "purple")]
print(f"products tagged shoes AND purple: {len(purple_shoes)}")
sample = kb.by_sku(sorted(purple_shoes)[0])
print(f"  e.g. {sample.sku}: {sample.raw['Name']!r} at {sample.price}")
