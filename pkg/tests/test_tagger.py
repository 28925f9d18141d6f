import itertools
import math
import random

import pytest

from shopql.catalog import ConfigStrategy, TagSchema, extract_tags, parse_catalog
from shopql.errors import SchemaMismatchError, TrainingError
from shopql.forms import Comparison, LogicalForm, Predicate
from shopql.grammar import compile_grammar, generate_triples, parse_production_file
from shopql.tagger import (
    ParseFailure,
    ParseResult,
    ParserModel,
    TrainingConfig,
    evaluate,
    gold_labels,
    label_set,
    load_model,
    parse,
    save_model,
    train,
    viterbi_decode,
)


def _tiny_kb(rows: str):
    schema = TagSchema(kinds=("SORTAL", "COLOR", "PRICE"))
    return extract_tags(
        parse_catalog(rows),
        schema,
        [ConfigStrategy("SORTAL", "Category"), ConfigStrategy("COLOR", "Color")],
    )


@pytest.fixture(scope="module")
def mini_model(mini_kb, mini_productions):
    gen = compile_grammar(mini_productions, mini_kb)
    triples = generate_triples(gen, 400, seed=3, policy="over_generate")
    return train(triples, TrainingConfig(seed=5, epochs=8), mini_kb), triples


# --- training -------------------------------------------------------------------

def test_singleton_memorization():
    kb = _tiny_kb("sku,Category,Color\nA1,shoes,purple\n")
    gen = compile_grammar(parse_production_file("[COLOR] [SORTAL]"), kb)
    triples = generate_triples(gen, 1, seed=1)
    model = train(triples, TrainingConfig(seed=1, epochs=5), kb)
    result = parse(model, "purple shoes")
    assert isinstance(result, ParseResult)
    assert result.form == triples[0].form
    assert result.confidence > 0


def test_empty_training_set_rejected(mini_kb):
    with pytest.raises(TrainingError):
        train([], TrainingConfig(), mini_kb)


def test_degenerate_labels_rejected():
    kb = _tiny_kb("sku,Category,Color\nA1,shoes,purple\nA2,shirts,red\n")
    gen = compile_grammar(parse_production_file("[SORTAL]"), kb)
    triples = generate_triples(gen, 5, seed=1, policy="over_generate")
    with pytest.raises(TrainingError, match="degenerate"):
        train(triples, TrainingConfig(), kb)


def test_training_deterministic_under_seed(mini_kb, mini_productions):
    gen = compile_grammar(mini_productions, mini_kb)
    triples = generate_triples(gen, 150, seed=3, policy="over_generate")
    m1 = train(triples, TrainingConfig(seed=5, epochs=3), mini_kb)
    m2 = train(triples, TrainingConfig(seed=5, epochs=3), mini_kb)
    assert m1.weights == m2.weights
    assert m1.transitions == m2.transitions
    assert m1.dataset_hash == m2.dataset_hash


# --- decoding -------------------------------------------------------------------

def _brute_force(emit, labels, transitions):
    n = len(emit)
    best = (-math.inf, None)
    second = -math.inf
    for seq in itertools.product(range(len(labels)), repeat=n):
        score = transitions.get(("<s>", labels[seq[0]]), 0.0)
        score += sum(emit[i][seq[i]] for i in range(n))
        for a, b in zip(seq, seq[1:]):
            score += transitions.get((labels[a], labels[b]), 0.0)
        score += transitions.get((labels[seq[-1]], "</s>"), 0.0)
        if score > best[0]:
            second = best[0]
            best = (score, seq)
        elif score > second:
            second = score
    return best, second


def test_decode_matches_brute_force_argmax():
    rng = random.Random(99)
    labels = list(label_set(("SORTAL", "COLOR", "PRICE")))  # 8 labels
    for trial in range(12):
        n = rng.randint(1, 4)
        emit = [[rng.uniform(-2, 2) for _ in labels] for _ in range(n)]
        transitions = {}
        for a in labels + ["<s>"]:
            for b in labels + ["</s>"]:
                if rng.random() < 0.6:
                    transitions[(a, b)] = rng.uniform(-1, 1)
        decoded, best, second = viterbi_decode(emit, labels, transitions)
        (bf_score, bf_seq), bf_second = _brute_force(emit, labels, transitions)
        assert best == pytest.approx(bf_score, abs=1e-9)
        assert [labels[i] for i in bf_seq] == decoded
        assert second == pytest.approx(bf_second, abs=1e-9)


def test_margin_nonnegative(mini_model):
    model, triples = mini_model
    for triple in triples[:50]:
        result = parse(model, triple.query)
        assert isinstance(result, ParseResult)
        assert result.margin >= 0


# --- parsing --------------------------------------------------------------------

def test_parse_brand_color_sortal(mini_model):
    model, _ = mini_model
    result = parse(model, "prada purple shoes")
    assert isinstance(result, ParseResult)
    assert result.form == LogicalForm.make(
        [Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"), Predicate("BRAND", "prada")]
    )
    assert 0 < result.confidence <= 1


def test_parse_price_comparison(mini_model):
    model, _ = mini_model
    result = parse(model, "shoes under 100")
    assert isinstance(result, ParseResult)
    assert result.form == LogicalForm.make(
        [Predicate("SORTAL", "shoes"), Comparison("PRICE", "<", 100.0)]
    )


def test_parse_failure_on_out_of_vocabulary(mini_model):
    model, _ = mini_model
    assert isinstance(parse(model, "zxqv"), ParseFailure)


def test_parse_empty_query_is_input_error(mini_model):
    model, _ = mini_model
    with pytest.raises(ValueError):
        parse(model, "   ")


def test_parse_deterministic(mini_model):
    model, _ = mini_model
    a = parse(model, "gucci dark red shoes")
    b = parse(model, "gucci dark red shoes")
    assert a == b


def test_generation_closure_memorization_floor(mini_model):
    model, triples = mini_model
    for triple in triples:
        result = parse(model, triple.query)
        assert isinstance(result, ParseResult), triple.query
        assert result.form == triple.form, triple.query


def test_multiword_value_resolves_via_gazetteer(mini_model):
    model, _ = mini_model
    result = parse(model, "dark red shoes")
    assert isinstance(result, ParseResult)
    assert result.form.kind_atom("COLOR") == Predicate("COLOR", "dark red")


def test_calibration_table_monotone(mini_model):
    model, _ = mini_model
    values = model.calibration.values
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= 1.0 for v in values)


def test_parse_failure_carries_no_confidence(mini_model):
    model, _ = mini_model
    failure = parse(model, "zxqv")
    assert isinstance(failure, ParseFailure)
    assert not hasattr(failure, "confidence")


def test_gold_labels_for_price_triples(mini_kb, mini_productions):
    gen = compile_grammar(mini_productions, mini_kb)
    triples = generate_triples(gen, 300, seed=3, policy="over_generate")
    price_triple = next(t for t in triples if "under" in t.query)
    labels = gold_labels(price_triple)
    tokens = price_triple.query.split(" ")
    assert labels[tokens.index("under")] == "OP-LT"
    assert labels[-1] == "NUM"
    assert labels[0].startswith("B-")


# --- evaluation -----------------------------------------------------------------

def test_evaluate_on_training_singleton():
    kb = _tiny_kb("sku,Category,Color\nA1,shoes,purple\n")
    gen = compile_grammar(parse_production_file("[COLOR] [SORTAL]"), kb)
    triples = generate_triples(gen, 1, seed=1)
    model = train(triples, TrainingConfig(seed=1, epochs=5), kb)
    metrics = evaluate(model, triples)
    assert metrics.exact_match == 1.0
    assert metrics.failure_rate == 0.0


def test_evaluate_rejects_empty_heldout(mini_model):
    model, _ = mini_model
    with pytest.raises(ValueError):
        evaluate(model, [])


def test_label_shuffled_model_scores_strictly_lower(mini_model):
    import dataclasses

    model, triples = mini_model
    content = [l for l in model.labels if l != "O"]
    rotated = dict(zip(content, content[1:] + content[:1]))
    rotated["O"] = "O"
    shuffled = dataclasses.replace(
        model,
        weights={(f, rotated[l]): w for (f, l), w in model.weights.items()},
    )
    heldout = triples[:80]
    assert evaluate(shuffled, heldout).exact_match < evaluate(model, heldout).exact_match


def test_metrics_are_rates(mini_model):
    model, triples = mini_model
    metrics = evaluate(model, triples[:60])
    assert 0.0 <= metrics.exact_match <= 1.0
    assert 0.0 <= metrics.failure_rate <= 1.0
    for precision, recall, f1 in metrics.per_kind.values():
        assert 0.0 <= precision <= 1.0
        assert 0.0 <= recall <= 1.0
        assert 0.0 <= f1 <= 1.0


def test_exact_match_bounded_by_per_kind_recall(mini_model):
    # metric arithmetic: among triples carrying an atom of kind k, the
    # exact-match rate cannot exceed recall for k (forms hold at most one
    # atom per kind, so each such triple contributes exactly one gold atom)
    import dataclasses

    from shopql.forms import atom_kind

    model, triples = mini_model
    content = [l for l in model.labels if l != "O"]
    rotated = dict(zip(content, content[1:] + content[:1]))
    rotated["O"] = "O"
    degraded = dataclasses.replace(
        model,
        weights={(f, rotated[l]): w for (f, l), w in model.weights.items()},
    )
    for candidate in (model, degraded):
        heldout = triples[:120]
        metrics = evaluate(candidate, heldout)
        for kind, (_p, recall, _f1) in metrics.per_kind.items():
            with_kind = [
                t for t in heldout if any(atom_kind(a) == kind for a in t.form.atoms)
            ]
            if not with_kind:
                continue
            exact = sum(
                1
                for t in with_kind
                if isinstance(parse(candidate, t.query), ParseResult)
                and parse(candidate, t.query).form == t.form
            )
            assert exact / len(with_kind) <= recall + 1e-9


# --- artifact -------------------------------------------------------------------

def test_model_round_trip(tmp_path, mini_model):
    model, triples = mini_model
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path, expected_fingerprint=model.schema_fingerprint)
    assert loaded.weights == model.weights
    assert loaded.transitions == model.transitions
    assert loaded.gazetteer == model.gazetteer
    assert loaded.calibration == model.calibration
    result = parse(loaded, triples[0].query)
    assert isinstance(result, ParseResult)
    assert result.form == triples[0].form


def test_model_fingerprint_mismatch_is_hard_error(tmp_path, mini_model):
    model, _ = mini_model
    path = tmp_path / "model.json"
    save_model(model, path)
    with pytest.raises(SchemaMismatchError):
        load_model(path, expected_fingerprint="deadbeef")


def test_model_file_rejects_foreign_json(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"some": "thing"}')
    with pytest.raises(ValueError):
        load_model(path)
