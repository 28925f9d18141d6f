"""Generate the training corpus: queries, logical forms and golden SKU sets,
all three produced jointly from one grammar pass, so they cannot drift apart.
"""

from pathlib import Path

from shopql.catalog import extract_tags, load_catalog
from shopql.config import load_engine_config
from shopql.forms import linear_scan
from shopql.grammar import augment_synonyms, compile_grammar, generate_triples, load_productions

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
catalog = load_catalog(ROOT / "fixtures" / "fixture_1k.csv")
kb = extract_tags(catalog, config.schema, config.strategies)

productions = load_productions(ROOT / "fixtures" / "grammar.txt")
print(f"{len(productions)} productions, e.g. {productions[5].name!r}")

generator = compile_grammar(productions, kb)
print(f"slot-filling space: {generator.space_size} combinations")

triples = generate_triples(generator, n=2000, seed=7, policy="over_generate")
nonempty = sum(1 for t in triples if t.golden)
print(f"generated {len(triples)} triples ({nonempty} with non-empty golden sets)\n")

for triple in triples[:5]:
    atoms = ", ".join(
        f"{a.kind}={a.value}" if hasattr(a, "value") else f"PRICE {a.op} {a.bound}"
        for a in triple.form.atoms
    )
    print(f"  {triple.query!r:<45} [{atoms}] -> {len(triple.golden)} SKUs")

# the module's core contract: stored golden sets equal a brute-force scan
assert all(t.golden == linear_scan(t.form, kb.products) for t in triples)
print("\nisomorphism check: every golden set equals the brute-force scan")

augmented = augment_synonyms(triples, config.synonyms, vocab=kb.vocab)
extra = [t for t in augmented[len(triples):]][:3]
print(f"synonym augmentation added {len(augmented) - len(triples)} surface variants:")
for triple in extra:
    print(f"  {triple.query!r} (same form, same golden set)")
