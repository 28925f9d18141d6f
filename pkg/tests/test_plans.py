import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shopql.catalog import ConfigStrategy, TagSchema, extract_tags, parse_catalog
from shopql.errors import FormError, SchemaMismatchError
from shopql.forms import Comparison, LogicalForm, Predicate, linear_scan
from shopql.plans import (
    DropAtom,
    FallbackPolicy,
    FallbackTrace,
    IndexLookup,
    NumericFilter,
    RelaxValue,
    compile_form,
    execute,
    execute_with_fallback,
    explain,
    rank,
)


def _form(*atoms):
    return LogicalForm.make(atoms)


def _read_sql_conjuncts(sql: str):
    """Toy conjunct reader for the round-trip check."""
    _, where = sql.split(" WHERE ", 1)
    nodes = []
    for conjunct in where.split(" AND "):
        match = re.fullmatch(r"(\w+) = '((?:[^']|'')*)'", conjunct)
        if match:
            nodes.append(IndexLookup(match.group(1).upper(), match.group(2).replace("''", "'")))
            continue
        match = re.fullmatch(r"(\w+) (<=|>=|<|>|=) ([\d.]+)", conjunct)
        if not match:
            raise AssertionError(f"unreadable conjunct: {conjunct!r}")
        nodes.append(
            NumericFilter(match.group(1).upper(), match.group(2), float(match.group(3)))
        )
    return nodes


# --- compilation ----------------------------------------------------------------

def test_compile_three_predicates():
    plan = compile_form(
        _form(
            Predicate("SORTAL", "shoes"),
            Predicate("COLOR", "purple"),
            Predicate("BRAND", "prada"),
        )
    )
    assert len(plan.nodes) == 3
    assert all(isinstance(n, IndexLookup) for n in plan.nodes)
    assert plan.sql_text == (
        "SELECT sku FROM products WHERE sortal = 'shoes' "
        "AND brand = 'prada' AND color = 'purple'"
    )


def test_compile_single_atom():
    plan = compile_form(_form(Predicate("SORTAL", "shoes")))
    assert plan.nodes == (IndexLookup("SORTAL", "shoes"),)
    assert plan.sql_text == "SELECT sku FROM products WHERE sortal = 'shoes'"


def test_compile_mixed_numeric():
    plan = compile_form(_form(Predicate("SORTAL", "shoes"), Comparison("PRICE", "<", 100.0)))
    assert plan.nodes == (
        IndexLookup("SORTAL", "shoes"),
        NumericFilter("PRICE", "<", 100.0),
    )
    assert plan.sql_text.endswith("WHERE sortal = 'shoes' AND price < 100")


def test_compile_empty_form_rejected():
    with pytest.raises(FormError):
        compile_form(LogicalForm(atoms=(), head=None))


def test_sql_rendering_round_trip():
    form = _form(
        Predicate("SORTAL", "shoes"),
        Predicate("BRAND", "levi's"),
        Comparison("PRICE", ">=", 99.5),
    )
    plan = compile_form(form)
    assert sorted(map(repr, _read_sql_conjuncts(plan.sql_text))) == sorted(
        map(repr, plan.nodes)
    )


def test_sql_rendering_deterministic():
    form = _form(Predicate("COLOR", "purple"), Predicate("SORTAL", "shoes"))
    assert compile_form(form).sql_text == compile_form(form).sql_text


# --- execution ------------------------------------------------------------------

def test_execute_equals_linear_scan_oracle(mini_kb):
    cases = [
        _form(Predicate("SORTAL", "shoes")),
        _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple")),
        _form(Predicate("BRAND", "prada"), Predicate("COLOR", "blue")),
        _form(Predicate("SORTAL", "shoes"), Comparison("PRICE", "<", 100.0)),
        _form(Comparison("PRICE", ">=", 120.0)),
        _form(Predicate("COLOR", "dark red")),
        _form(Predicate("SORTAL", "shoes"), Predicate("BRAND", "nike"),
              Comparison("PRICE", "<=", 45.0)),
    ]
    for form in cases:
        plan = compile_form(form, mini_kb.fingerprint)
        assert execute(plan, mini_kb) == linear_scan(form, mini_kb.products), form


def test_execute_on_empty_kb():
    kb = extract_tags(
        parse_catalog("sku,Category\n"),
        TagSchema(kinds=("SORTAL", "PRICE")),
        [ConfigStrategy("SORTAL", "Category")],
    )
    plan = compile_form(_form(Predicate("SORTAL", "shoes")))
    assert execute(plan, kb) == frozenset()


def test_execute_single_atom_matches_everything():
    kb = extract_tags(
        parse_catalog("sku,Category\nA1,shoes\nA2,shoes\n"),
        TagSchema(kinds=("SORTAL", "PRICE")),
        [ConfigStrategy("SORTAL", "Category")],
    )
    plan = compile_form(_form(Predicate("SORTAL", "shoes")))
    assert execute(plan, kb) == frozenset({"A1", "A2"})


def test_execute_fingerprint_mismatch(mini_kb):
    plan = compile_form(_form(Predicate("SORTAL", "shoes")), schema_fingerprint="bogus")
    with pytest.raises(SchemaMismatchError):
        execute(plan, mini_kb)


def test_sql_text_is_rendering_only(mini_kb):
    # executing a plan with doctored sql must not change its answer
    import dataclasses

    form = _form(Predicate("SORTAL", "shoes"))
    plan = compile_form(form, mini_kb.fingerprint)
    doctored = dataclasses.replace(plan, sql_text="SELECT nonsense")
    assert execute(doctored, mini_kb) == execute(plan, mini_kb)


# --- fallback ladder --------------------------------------------------------------

def test_exact_match_returns_empty_trace(mini_kb):
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    skus, trace = execute_with_fallback(form, mini_kb)
    assert skus == frozenset({"M001"})
    assert trace.steps == ()
    assert trace.message == "Showing exact matches for purple shoes."


def test_relax_to_similarity_nearest(no_purple_shoes_kb):
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    skus, trace = execute_with_fallback(form, no_purple_shoes_kb)
    assert skus == frozenset({"M002"})  # the dark red shoes
    assert trace.steps == (
        RelaxValue("COLOR", "purple", "dark red", 0.2, rationale="nearest color with matches"),
    )
    assert "purple" in trace.message and "dark red" in trace.message
    # sortal guarantee: everything returned is still shoes
    for sku in skus:
        assert "shoes" in no_purple_shoes_kb.by_sku(sku).tags["SORTAL"]


def test_drop_atom_when_no_relaxation_helps(mini_kb):
    # searching shoes of a brand nobody carries, with no BRAND similarity
    form = _form(Predicate("SORTAL", "shoes"), Predicate("BRAND", "armani"))
    skus, trace = execute_with_fallback(form, mini_kb)
    assert trace.steps == (DropAtom("BRAND", rationale="no brand match available"),)
    # ladder oracle: after the drop, the answer is exactly the sortal-only scan
    assert skus == linear_scan(_form(Predicate("SORTAL", "shoes")), mini_kb.products)


def test_fallback_requires_sortal(mini_kb):
    with pytest.raises(FormError):
        execute_with_fallback(_form(Predicate("COLOR", "purple")), mini_kb)


def test_max_steps_bounds_the_ladder(mini_kb):
    policy = FallbackPolicy(max_steps=0)
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "dark red"),
                 Predicate("BRAND", "nike"))
    skus, trace = execute_with_fallback(form, mini_kb, policy)
    assert skus == frozenset()
    assert trace.steps == ()


def test_relax_disabled_falls_back_to_drop(no_purple_shoes_kb):
    policy = FallbackPolicy(relax={"COLOR": False})
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    skus, trace = execute_with_fallback(form, no_purple_shoes_kb, policy)
    assert isinstance(trace.steps[0], DropAtom)
    assert skus == linear_scan(
        _form(Predicate("SORTAL", "shoes")), no_purple_shoes_kb.products
    )


def test_ladder_steps_verified_against_oracle(no_purple_shoes_kb):
    # two steps: relax cannot help brand, so brand drops, then color relaxes
    form = _form(
        Predicate("SORTAL", "shoes"),
        Predicate("COLOR", "purple"),
        Predicate("BRAND", "nike"),
    )
    skus, trace = execute_with_fallback(form, no_purple_shoes_kb)
    assert [type(s) for s in trace.steps] == [DropAtom, RelaxValue]
    # replay the trace with the independent scan
    current = form
    for step in trace.steps:
        if isinstance(step, RelaxValue):
            current = current.replace_value(step.kind, step.to_value)
        else:
            current = current.without_kind(step.kind)
    assert skus == linear_scan(current, no_purple_shoes_kb.products)
    assert skus == frozenset({"M002"})


def test_fallback_never_returns_non_sortal_items(fixture_kb):
    import random

    rng = random.Random(4)
    sortals = sorted(fixture_kb.vocab["SORTAL"])
    colors = sorted(fixture_kb.vocab["COLOR"])
    brands = sorted(fixture_kb.vocab["BRAND"])
    for _ in range(40):
        form = _form(
            Predicate("SORTAL", rng.choice(sortals)),
            Predicate("COLOR", rng.choice(colors)),
            Predicate("BRAND", rng.choice(brands)),
        )
        skus, _trace = execute_with_fallback(form, fixture_kb)
        for sku in skus:
            assert form.sortal in fixture_kb.by_sku(sku).tags.get("SORTAL", frozenset())


# --- ranking --------------------------------------------------------------------

def test_tier_dominates_any_popularity():
    results = rank(
        {"A", "B"},
        tiers={"A": 0, "B": 1},
        signals={"A": {"popularity": 1.0}, "B": {"popularity": 10.0}},
        weights={"popularity": 1.0},
    )
    assert [r.sku for r in results] == ["A", "B"]
    assert results[0].final_position == 1


def test_equal_tier_orders_by_signal():
    results = rank(
        {"A", "B"},
        tiers={"A": 0, "B": 0},
        signals={"A": {"popularity": 3.0}, "B": {"popularity": 5.0}},
        weights={"popularity": 1.0},
    )
    assert [r.sku for r in results] == ["B", "A"]


def test_all_zero_signals_fall_back_to_sku_order():
    results = rank({"C", "A", "B"}, tiers={"A": 0, "B": 0, "C": 0}, signals={}, weights={})
    assert [r.sku for r in results] == ["A", "B", "C"]


def test_missing_tier_is_an_error():
    with pytest.raises(ValueError):
        rank({"A"}, tiers={}, signals={}, weights={})


@settings(max_examples=200, deadline=None)
@given(
    st.dictionaries(
        st.text(alphabet="abcdefgh", min_size=1, max_size=3),
        st.tuples(
            st.integers(min_value=0, max_value=3),
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        ),
        min_size=1,
        max_size=8,
    )
)
def test_rank_properties(items):
    tiers = {sku: tier for sku, (tier, _) in items.items()}
    signals = {sku: {"popularity": pop} for sku, (_, pop) in items.items()}
    results = rank(set(items), tiers, signals, {"popularity": 1.0})
    for earlier, later in zip(results, results[1:]):
        assert earlier.relevance_tier <= later.relevance_tier
        if earlier.relevance_tier == later.relevance_tier:
            a = signals[earlier.sku]["popularity"]
            b = signals[later.sku]["popularity"]
            assert a > b or (a == b and earlier.sku < later.sku)
    assert [r.final_position for r in results] == list(range(1, len(results) + 1))


# --- explanations ------------------------------------------------------------------

def test_explain_exact():
    trace = FallbackTrace(steps=(), message="")
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    assert explain(trace, form) == "Showing exact matches for purple shoes."


def test_explain_relax():
    trace = FallbackTrace(steps=(RelaxValue("COLOR", "purple", "dark red", 0.2),), message="")
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    assert explain(trace, form) == (
        "We don't have purple shoes, showing dark red shoes instead."
    )


def test_explain_drop():
    trace = FallbackTrace(steps=(DropAtom("BRAND"),), message="")
    form = _form(Predicate("SORTAL", "shoes"), Predicate("BRAND", "prada"))
    assert explain(trace, form) == "We ignored brand to find more shoes."


def test_explain_templates_overridable(no_purple_shoes_kb):
    policy = FallbackPolicy(
        templates={
            "exact": "exact: {query}",
            "relax": "swap {from_value}->{to_value} for {sortal}",
            "drop": "drop {kind} for {sortal}",
        }
    )
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    _, trace = execute_with_fallback(form, no_purple_shoes_kb, policy)
    assert trace.message == "swap purple->dark red for shoes"
