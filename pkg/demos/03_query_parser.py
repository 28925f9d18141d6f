"""Train the slot tagger on synthetic triples and parse live queries.

The tagger labels tokens (B-COLOR, I-COLOR, ..., OP-LT, NUM), resolves the
spans through a gazetteer, and calibrates a confidence from the decode
margin. Out-of-vocabulary queries come back as ParseFailure values.
"""

from pathlib import Path

from shopql.catalog import extract_tags, load_catalog
from shopql.config import load_engine_config
from shopql.grammar import augment_synonyms, compile_grammar, generate_triples, load_productions
from shopql.tagger import ParseFailure, evaluate, parse, train

ROOT = Path(__file__).resolve().parent.parent

config = load_engine_config(ROOT / "fixtures" / "shop_fixture.yaml")
catalog = load_catalog(ROOT / "fixtures" / "fixture_1k.csv")
kb = extract_tags(catalog, config.schema, config.strategies)
generator = compile_grammar(load_productions(ROOT / "fixtures" / "grammar.txt"), kb)

triples = generate_triples(generator, n=3000, seed=7, policy="over_generate")
triples = augment_synonyms(triples, config.synonyms, vocab=kb.vocab)
split = int(len(triples) * 0.9)
model = train(triples[:split], config.training, kb)
print(f"trained on {split} triples; dataset hash {model.dataset_hash}")

metrics = evaluate(model, triples[split:])
print(f"heldout: exact-match {metrics.exact_match:.3f}, "
      f"parse failures {metrics.failure_rate:.3f}\n")

for query in [
    "prada purple shoes",
    "dark red boots for women",
    "shoes under 100",
    "nintendo switch",
    "zxqv blorp",
]:
    result = parse(model, query)
    if isinstance(result, ParseFailure):
        print(f"  {query!r:<28} -> ParseFailure ({result.reason})")
        continue
    labels = " ".join(f"{t}/{l}" for t, l in result.labeled)
    atoms = ", ".join(
        f"{a.kind}={a.value}" if hasattr(a, "value") else f"PRICE {a.op} {a.bound}"
        for a in result.form.atoms
    )
    print(f"  {query!r:<28} -> [{atoms}]  confidence {result.confidence:.2f}")
    print(f"  {'':<28}    {labels}")
