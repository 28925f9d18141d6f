"""Compile logical forms into executable query plans and run them.

A plan is one filter node per atom, combined by intersection, plus a SQL
rendering of the same conjunction. The SQL text is a faithful *display* of
the program that runs — execution itself works on the knowledge base's
inverted index and never touches the string.

When an exact plan returns nothing the fallback ladder relaxes it one step
at a time: substitute the nearest similar value for a non-sortal atom first,
drop a non-sortal atom if no substitution helps, and never touch the sortal.
The item type the shopper asked for is a hard constraint; everything else is
negotiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .catalog import PRICE, SORTAL, KnowledgeBase
from .errors import FormError, SchemaMismatchError
from .forms import (
    Comparison,
    LogicalForm,
    Predicate,
    atom_kind,
    format_bound,
    paraphrase,
    satisfies,
)


@dataclass(frozen=True)
class IndexLookup:
    kind: str
    value: str


@dataclass(frozen=True)
class NumericFilter:
    attribute: str
    op: str
    bound: float


PlanNode = IndexLookup | NumericFilter


@dataclass(frozen=True)
class QueryPlan:
    nodes: tuple[PlanNode, ...]
    combine: str
    sql_text: str
    schema_fingerprint: Optional[str] = None


def _sql_literal(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def compile_form(form: LogicalForm, schema_fingerprint: Optional[str] = None) -> QueryPlan:
    """One plan node per atom plus a canonical SQL rendering."""
    if not form.atoms:
        raise FormError("cannot compile an empty form")
    nodes: list[PlanNode] = []
    conjuncts: list[str] = []
    for atom in form.atoms:
        if isinstance(atom, Predicate):
            nodes.append(IndexLookup(atom.kind, atom.value))
            conjuncts.append(f"{atom.kind.lower()} = {_sql_literal(atom.value)}")
        else:
            nodes.append(NumericFilter(atom.attribute, atom.op, atom.bound))
            conjuncts.append(f"{atom.attribute.lower()} {atom.op} {format_bound(atom.bound)}")
    sql = "SELECT sku FROM products WHERE " + " AND ".join(conjuncts)
    return QueryPlan(
        nodes=tuple(nodes),
        combine="intersection",
        sql_text=sql,
        schema_fingerprint=schema_fingerprint,
    )


def execute(plan: QueryPlan, kb: KnowledgeBase) -> frozenset[str]:
    """Exact intersection semantics over the inverted index."""
    if plan.schema_fingerprint is not None and plan.schema_fingerprint != kb.fingerprint:
        raise SchemaMismatchError(
            f"plan fingerprint {plan.schema_fingerprint} does not match "
            f"knowledge base {kb.fingerprint}"
        )
    lookups = [n for n in plan.nodes if isinstance(n, IndexLookup)]
    numerics = [n for n in plan.nodes if isinstance(n, NumericFilter)]

    result: Optional[frozenset[str]] = None
    for node in sorted(
        lookups, key=lambda n: len(kb.inverted.get((n.kind, n.value), frozenset()))
    ):
        postings = kb.inverted.get((node.kind, node.value), frozenset())
        result = postings if result is None else result & postings
        if not result:
            return frozenset()

    if result is None:  # purely numeric plan
        result = frozenset(p.sku for p in kb.products)
    for node in numerics:
        plan_atom = Comparison(node.attribute, node.op, node.bound)
        result = frozenset(sku for sku in result if satisfies(kb.by_sku(sku), plan_atom))
    return result


@dataclass(frozen=True)
class RelaxValue:
    kind: str
    from_value: str
    to_value: str
    distance: float
    rationale: str = ""

    def __post_init__(self) -> None:
        if self.kind == SORTAL:
            raise FormError("the sortal is never relaxed")


@dataclass(frozen=True)
class DropAtom:
    kind: str
    rationale: str = ""

    def __post_init__(self) -> None:
        if self.kind == SORTAL:
            raise FormError("the sortal is never dropped")


FallbackStep = RelaxValue | DropAtom


@dataclass(frozen=True)
class FallbackTrace:
    steps: tuple[FallbackStep, ...]
    message: str


DEFAULT_TEMPLATES = {
    "exact": "Showing exact matches for {query}.",
    "relax": "We don't have {from_value} {sortal}, showing {to_value} {sortal} instead.",
    "drop": "We ignored {kind} to find more {sortal}.",
}


@dataclass(frozen=True)
class FallbackPolicy:
    """Ladder configuration: which kinds may relax or be dropped, in what
    order, and how far the ladder goes."""

    priority: tuple[str, ...] = ()
    relax: Mapping[str, bool] = field(default_factory=dict)
    drop: Mapping[str, bool] = field(default_factory=dict)
    max_steps: int = 3
    templates: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))

    def may_relax(self, kind: str) -> bool:
        return kind != SORTAL and self.relax.get(kind, True)

    def may_drop(self, kind: str) -> bool:
        return kind != SORTAL and self.drop.get(kind, True)

    def ordered_kinds(self, kinds: Sequence[str], schema_kinds: Sequence[str]) -> list[str]:
        ranked = {k: i for i, k in enumerate(self.priority)}
        fallback_rank = len(self.priority)
        return sorted(
            (k for k in kinds if k != SORTAL),
            key=lambda k: (ranked.get(k, fallback_rank), k),
        )


def execute_with_fallback(
    form: LogicalForm,
    kb: KnowledgeBase,
    policy: Optional[FallbackPolicy] = None,
) -> tuple[frozenset[str], FallbackTrace]:
    """Run the plan, relaxing it stepwise while the result is empty.

    The caller must route sortal-less forms elsewhere; the ladder's whole
    guarantee is anchored on the sortal staying untouched, so every returned
    SKU carries the form's sortal value.
    """
    if form.sortal is None:
        raise FormError("fallback execution requires a sortal atom")
    policy = policy or FallbackPolicy()

    current = form
    steps: list[FallbackStep] = []
    result = execute(compile_form(current, kb.fingerprint), kb)
    while not result and len(steps) < policy.max_steps:
        non_sortal = [atom_kind(a) for a in current.atoms if atom_kind(a) != SORTAL]
        if not non_sortal:
            break
        ordered = policy.ordered_kinds(non_sortal, kb.schema.kinds)
        step: Optional[FallbackStep] = None

        for kind in ordered:
            atom = current.kind_atom(kind)
            if not isinstance(atom, Predicate) or not policy.may_relax(kind):
                continue
            for neighbor, distance in kb.schema.neighbors(kind, atom.value):
                candidate = current.replace_value(kind, neighbor)
                candidate_result = execute(compile_form(candidate, kb.fingerprint), kb)
                if candidate_result:
                    step = RelaxValue(
                        kind=kind,
                        from_value=atom.value,
                        to_value=neighbor,
                        distance=distance,
                        rationale=f"nearest {kind.lower()} with matches",
                    )
                    current, result = candidate, candidate_result
                    break
            if step:
                break

        if step is None:
            for kind in ordered:
                if not policy.may_drop(kind):
                    continue
                step = DropAtom(kind=kind, rationale=f"no {kind.lower()} match available")
                current = current.without_kind(kind)
                result = execute(compile_form(current, kb.fingerprint), kb)
                break
        if step is None:
            break
        steps.append(step)

    trace = FallbackTrace(
        steps=tuple(steps), message=explain_steps(tuple(steps), form, policy.templates)
    )
    return result, trace


def explain_steps(
    steps: Sequence[FallbackStep],
    form: LogicalForm,
    templates: Optional[Mapping[str, str]] = None,
) -> str:
    """Deterministic human-readable account of what the ladder did."""
    templates = templates or DEFAULT_TEMPLATES
    sortal = form.sortal or "items"
    if not steps:
        return templates["exact"].format(query=paraphrase(form))
    sentences = []
    for step in steps:
        if isinstance(step, RelaxValue):
            sentences.append(
                templates["relax"].format(
                    from_value=step.from_value, to_value=step.to_value, sortal=sortal
                )
            )
        else:
            sentences.append(templates["drop"].format(kind=step.kind.lower(), sortal=sortal))
    return " ".join(sentences)


def explain(trace: FallbackTrace, form: LogicalForm) -> str:
    return explain_steps(trace.steps, form)


@dataclass(frozen=True)
class RankedResult:
    sku: str
    relevance_tier: int
    rank_signals: Mapping[str, float]
    final_position: int


def rank(
    skus: frozenset[str] | set[str],
    tiers: Mapping[str, int],
    signals: Mapping[str, Mapping[str, float]],
    weights: Mapping[str, float],
) -> list[RankedResult]:
    """Order results by relevance tier first; signals only break ties.

    Items in different tiers never interleave no matter how large the
    signal values get; within a tier the weighted signal score decides,
    and the SKU string settles exact ties deterministically.
    """
    missing = [sku for sku in skus if sku not in tiers]
    if missing:
        raise ValueError(f"no relevance tier for skus: {sorted(missing)[:5]}")

    def score(sku: str) -> float:
        own = signals.get(sku, {})
        return sum(weight * own.get(name, 0.0) for name, weight in weights.items())

    ordered = sorted(skus, key=lambda sku: (tiers[sku], -score(sku), sku))
    return [
        RankedResult(
            sku=sku,
            relevance_tier=tiers[sku],
            rank_signals=dict(signals.get(sku, {})),
            final_position=position,
        )
        for position, sku in enumerate(ordered, start=1)
    ]
