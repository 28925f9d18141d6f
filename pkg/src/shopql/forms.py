"""Logical forms: typed conjunctions over a single implicit variable.

A form is a list of atoms, each either a categorical predicate
(``COLOR = purple``) or a numeric comparison (``PRICE < 100``), with at most
one atom per kind. Atoms are kept in a canonical order (sortal first, then
kinds alphabetically) so forms compare by value.

:func:`linear_scan` is the reference evaluator: a brute-force pass over all
products. It exists so the compiled plan executor has something independent
to be checked against, and must stay free of any indexing tricks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .catalog import PRICE, SORTAL, Product
from .errors import FormError

COMPARISON_OPS = ("<", "<=", ">", ">=", "=")


@dataclass(frozen=True)
class Predicate:
    kind: str
    value: str


@dataclass(frozen=True)
class Comparison:
    attribute: str
    op: str
    bound: float

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise FormError(f"unknown comparison operator {self.op!r}")


Atom = Predicate | Comparison


def atom_kind(atom: Atom) -> str:
    return atom.kind if isinstance(atom, Predicate) else atom.attribute


@dataclass(frozen=True)
class LogicalForm:
    atoms: tuple[Atom, ...]
    head: Optional[int]

    @classmethod
    def make(cls, atoms: Iterable[Atom]) -> "LogicalForm":
        ordered = canonical_atom_order(list(atoms))
        kinds = [atom_kind(a) for a in ordered]
        if len(set(kinds)) != len(kinds):
            raise FormError(f"more than one atom for a kind: {kinds}")
        head = next(
            (i for i, a in enumerate(ordered) if isinstance(a, Predicate) and a.kind == SORTAL),
            None,
        )
        return cls(atoms=tuple(ordered), head=head)

    @property
    def sortal(self) -> Optional[str]:
        if self.head is None:
            return None
        atom = self.atoms[self.head]
        assert isinstance(atom, Predicate)
        return atom.value

    def kind_atom(self, kind: str) -> Optional[Atom]:
        for atom in self.atoms:
            if atom_kind(atom) == kind:
                return atom
        return None

    def replace_value(self, kind: str, value: str) -> "LogicalForm":
        atoms = [
            Predicate(kind, value) if atom_kind(a) == kind else a for a in self.atoms
        ]
        return LogicalForm.make(atoms)

    def without_kind(self, kind: str) -> "LogicalForm":
        return LogicalForm.make([a for a in self.atoms if atom_kind(a) != kind])

    def __len__(self) -> int:
        return len(self.atoms)


def canonical_atom_order(atoms: Sequence[Atom]) -> list[Atom]:
    """Sortal atom first, remaining atoms by kind name."""

    def key(atom: Atom) -> tuple[int, str]:
        kind = atom_kind(atom)
        return (0 if kind == SORTAL else 1, kind)

    return sorted(atoms, key=key)


def _compare(value: float, op: str, bound: float) -> bool:
    if op == "<":
        return value < bound
    if op == "<=":
        return value <= bound
    if op == ">":
        return value > bound
    if op == ">=":
        return value >= bound
    return value == bound


def satisfies(product: Product, atom: Atom) -> bool:
    if isinstance(atom, Predicate):
        return atom.value in product.tags.get(atom.kind, frozenset())
    if product.price is None:
        return False
    return _compare(product.price, atom.op, atom.bound)


def linear_scan(form: LogicalForm, products: Sequence[Product]) -> frozenset[str]:
    """Brute-force evaluation of a form: the oracle every other execution
    path is measured against."""
    if not form.atoms:
        raise FormError("cannot evaluate an empty form")
    atoms = form.atoms
    return frozenset(
        product.sku for product in products if all(satisfies(product, a) for a in atoms)
    )


_OP_PHRASE = {"<": "under", "<=": "at most", ">": "over", ">=": "at least", "=": "at"}


def format_bound(bound: float) -> str:
    return str(int(bound)) if float(bound).is_integer() else str(bound)


def paraphrase(form: LogicalForm) -> str:
    """Natural-order rendering of a form, e.g. ``prada purple shoes under 100``."""
    modifiers = [
        a.value
        for a in form.atoms
        if isinstance(a, Predicate) and a.kind != SORTAL
    ]
    parts = modifiers + ([form.sortal] if form.sortal else [])
    for atom in form.atoms:
        if isinstance(atom, Comparison):
            parts.append(f"{_OP_PHRASE[atom.op]} {format_bound(atom.bound)}")
    return " ".join(parts) if parts else "anything"


def atoms_to_json(form: LogicalForm) -> list[dict]:
    out: list[dict] = []
    for atom in form.atoms:
        if isinstance(atom, Predicate):
            out.append({"kind": atom.kind, "value": atom.value})
        else:
            out.append({"attr": atom.attribute, "op": atom.op, "bound": atom.bound})
    return out


def atoms_from_json(items: Sequence[dict]) -> LogicalForm:
    atoms: list[Atom] = []
    for item in items:
        if "kind" in item:
            atoms.append(Predicate(item["kind"], item["value"]))
        else:
            atoms.append(Comparison(item["attr"], item["op"], float(item["bound"])))
    return LogicalForm.make(atoms)
