import pytest

from shopql.errors import FormError
from shopql.forms import (
    Comparison,
    LogicalForm,
    Predicate,
    atoms_from_json,
    atoms_to_json,
    linear_scan,
    paraphrase,
    satisfies,
)


def _form(*atoms):
    return LogicalForm.make(atoms)


def test_canonical_order_sortal_first_then_alphabetical():
    form = _form(
        Comparison("PRICE", "<", 100.0),
        Predicate("COLOR", "purple"),
        Predicate("SORTAL", "shoes"),
        Predicate("BRAND", "prada"),
    )
    kinds = [a.kind if isinstance(a, Predicate) else a.attribute for a in form.atoms]
    assert kinds == ["SORTAL", "BRAND", "COLOR", "PRICE"]
    assert form.head == 0
    assert form.sortal == "shoes"


def test_equality_is_order_independent():
    a = _form(Predicate("COLOR", "purple"), Predicate("SORTAL", "shoes"))
    b = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    assert a == b


def test_duplicate_kind_rejected():
    with pytest.raises(FormError):
        _form(Predicate("COLOR", "red"), Predicate("COLOR", "blue"))


def test_headless_form_allowed():
    form = _form(Predicate("COLOR", "purple"))
    assert form.head is None
    assert form.sortal is None


def test_unknown_comparison_op_rejected():
    with pytest.raises(FormError):
        Comparison("PRICE", "!=", 5.0)


def test_satisfies_and_linear_scan(mini_kb):
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    assert linear_scan(form, mini_kb.products) == frozenset({"M001"})
    purple_shoe = mini_kb.by_sku("M001")
    assert satisfies(purple_shoe, Predicate("COLOR", "purple"))
    assert not satisfies(purple_shoe, Predicate("COLOR", "red"))


def test_price_comparisons(mini_kb):
    cheap = _form(Predicate("SORTAL", "shoes"), Comparison("PRICE", "<", 100.0))
    assert linear_scan(cheap, mini_kb.products) == frozenset({"M002", "M006"})
    exact = _form(Comparison("PRICE", "=", 30.0))
    assert linear_scan(exact, mini_kb.products) == frozenset({"M003"})


def test_priceless_product_never_matches_comparisons(mini_kb):
    import dataclasses

    product = dataclasses.replace(mini_kb.by_sku("M001"), price=None)
    assert not satisfies(product, Comparison("PRICE", "<", 1e9))


def test_linear_scan_empty_form_rejected(mini_kb):
    with pytest.raises(FormError):
        linear_scan(LogicalForm(atoms=(), head=None), mini_kb.products)


def test_replace_and_drop_helpers():
    form = _form(Predicate("SORTAL", "shoes"), Predicate("COLOR", "purple"))
    relaxed = form.replace_value("COLOR", "dark red")
    assert relaxed.kind_atom("COLOR") == Predicate("COLOR", "dark red")
    dropped = form.without_kind("COLOR")
    assert [a.kind for a in dropped.atoms] == ["SORTAL"]


def test_paraphrase_orders_modifiers_before_sortal():
    form = _form(
        Predicate("SORTAL", "shoes"),
        Predicate("BRAND", "prada"),
        Predicate("COLOR", "purple"),
    )
    assert paraphrase(form) == "prada purple shoes"


def test_paraphrase_includes_price_phrase():
    form = _form(Predicate("SORTAL", "shoes"), Comparison("PRICE", "<", 100.0))
    assert paraphrase(form) == "shoes under 100"


def test_atoms_json_round_trip():
    form = _form(
        Predicate("SORTAL", "shoes"),
        Predicate("COLOR", "dark red"),
        Comparison("PRICE", ">=", 99.5),
    )
    assert atoms_from_json(atoms_to_json(form)) == form
