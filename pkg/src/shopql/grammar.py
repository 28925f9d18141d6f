"""NP grammar over knowledge-base vocabularies and joint triple generation.

Each production is a flat template of slots and literal tokens. Filling the
slots yields a query string and its logical form in one step; evaluating the
form with the brute-force scan yields the golden SKU set, so all three pieces
of a training record are generated jointly and stay consistent by
construction.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .catalog import PRICE, SORTAL, KnowledgeBase
from .errors import GrammarError
from .forms import Atom, Comparison, LogicalForm, Predicate, linear_scan
from .text import tokenize

# Phrasings allowed before a [PRICE] slot. Only strict bounds are generated;
# the executor still understands <=, >= and = for hand-built forms.
PRICE_PHRASINGS = {"under": "<", "below": "<", "over": ">", "above": ">"}


@dataclass(frozen=True)
class Slot:
    kind: str


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class PriceSlot:
    op: str
    phrasing: str


Element = Slot | Literal | PriceSlot


@dataclass(frozen=True)
class Production:
    name: str
    elements: tuple[Element, ...]

    def __post_init__(self) -> None:
        kinds = [e.kind for e in self.elements if isinstance(e, Slot)]
        kinds += [PRICE for e in self.elements if isinstance(e, PriceSlot)]
        if len(set(kinds)) != len(kinds):
            raise GrammarError(f"production {self.name!r} repeats a slot kind: {kinds}")
        if kinds.count(SORTAL) > 1:
            raise GrammarError(f"production {self.name!r} has more than one sortal slot")


@dataclass(frozen=True)
class SynthTriple:
    """A jointly generated ⟨query, logical form, golden SKU set⟩ record."""

    query: str
    form: LogicalForm
    golden: frozenset[str]
    production: str
    alignment: tuple[tuple[int, int], ...]  # (token index, atom index)


def parse_production_line(line: str) -> Optional[Production]:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    elements: list[Element] = []
    for token in stripped.split():
        if token.startswith("[") and token.endswith("]"):
            kind = token[1:-1]
            if not kind or not kind.isupper():
                raise GrammarError(f"bad slot {token!r} in production line {line!r}")
            if kind == PRICE:
                if not elements or not isinstance(elements[-1], Literal):
                    raise GrammarError(
                        f"[PRICE] must follow a phrasing literal in {line!r}"
                    )
                phrasing = elements[-1].text
                if phrasing not in PRICE_PHRASINGS:
                    raise GrammarError(
                        f"unknown price phrasing {phrasing!r} in {line!r}; "
                        f"allowed: {sorted(PRICE_PHRASINGS)}"
                    )
                elements[-1] = PriceSlot(op=PRICE_PHRASINGS[phrasing], phrasing=phrasing)
            else:
                elements.append(Slot(kind))
        else:
            lowered = token.lower()
            if tokenize(lowered) != [lowered]:
                raise GrammarError(f"literal {token!r} is not a single clean token")
            elements.append(Literal(lowered))
    return Production(name=stripped, elements=tuple(elements))


def parse_production_file(text: str) -> list[Production]:
    productions = []
    for line in text.splitlines():
        production = parse_production_line(line)
        if production is not None:
            productions.append(production)
    return productions


def load_productions(path: str | Path) -> list[Production]:
    return parse_production_file(Path(path).read_text(encoding="utf-8"))


def _round_sig(x: float, digits: int = 2) -> float:
    if x == 0:
        return 0.0
    return round(x, -int(math.floor(math.log10(abs(x)))) + digits - 1)


def price_bounds(kb: KnowledgeBase) -> tuple[float, ...]:
    """Candidate price bounds: the p25/p50/p75/p90 quantiles of catalog
    prices, rounded to two significant digits."""
    prices = kb.prices()
    if not prices:
        return ()
    bounds = []
    for q in (0.25, 0.50, 0.75, 0.90):
        idx = max(0, math.ceil(q * len(prices)) - 1)
        bounds.append(_round_sig(prices[idx]))
    return tuple(sorted(set(bounds)))


@dataclass(frozen=True)
class _CompiledProduction:
    production: Production
    domains: tuple[tuple[str, ...], ...]  # one value tuple per slot-like element

    @property
    def size(self) -> int:
        n = 1
        for d in self.domains:
            n *= len(d)
        return n


@dataclass(frozen=True)
class Generator:
    """Immutable slot-filling generator compiled against a knowledge base."""

    kb: KnowledgeBase
    compiled: tuple[_CompiledProduction, ...]
    warnings: tuple[str, ...] = field(default=())

    @property
    def space_size(self) -> int:
        return sum(c.size for c in self.compiled)


def compile_grammar(productions: Sequence[Production], kb: KnowledgeBase) -> Generator:
    """Lexicalize productions from the knowledge base.

    A production whose slot has an empty vocabulary is disabled with a
    warning; if every production is disabled the grammar is unusable.
    """
    warnings: list[str] = []
    compiled: list[_CompiledProduction] = []
    bounds = price_bounds(kb)
    for production in productions:
        domains: list[tuple[str, ...]] = []
        disabled = None
        for element in production.elements:
            if isinstance(element, Slot):
                values = tuple(sorted(kb.vocab.get(element.kind, frozenset())))
                if not values:
                    disabled = f"empty vocabulary for {element.kind}"
                    break
                domains.append(values)
            elif isinstance(element, PriceSlot):
                if not bounds:
                    disabled = "no catalog prices for [PRICE]"
                    break
                domains.append(tuple(str(int(b)) if b.is_integer() else str(b) for b in bounds))
        if disabled:
            warnings.append(f"production {production.name!r} disabled: {disabled}")
            continue
        compiled.append(_CompiledProduction(production, tuple(domains)))
    if not compiled:
        raise GrammarError("no production could be lexicalized (empty grammar)")
    return Generator(kb=kb, compiled=tuple(compiled), warnings=tuple(warnings))


def realize(
    production: Production, values: Sequence[str]
) -> tuple[str, LogicalForm, tuple[tuple[int, int], ...]]:
    """Fill a production's slots and return (query, form, token alignment)."""
    tokens: list[str] = []
    atoms: list[Atom] = []
    token_atoms: list[tuple[int, Atom]] = []
    it = iter(values)
    for element in production.elements:
        if isinstance(element, Literal):
            tokens.append(element.text)
        elif isinstance(element, Slot):
            value = next(it)
            atom = Predicate(element.kind, value)
            atoms.append(atom)
            for part in value.split(" "):
                token_atoms.append((len(tokens), atom))
                tokens.append(part)
        else:
            bound_text = next(it)
            atom = Comparison(PRICE, element.op, float(bound_text))
            atoms.append(atom)
            token_atoms.append((len(tokens), atom))
            tokens.append(element.phrasing)
            token_atoms.append((len(tokens), atom))
            tokens.append(bound_text)
    form = LogicalForm.make(atoms)
    alignment = tuple(
        (token_index, form.atoms.index(atom)) for token_index, atom in token_atoms
    )
    return " ".join(tokens), form, alignment


def _decode_index(index: int, domains: Sequence[tuple[str, ...]]) -> list[str]:
    values = []
    for domain in reversed(domains):
        index, offset = divmod(index, len(domain))
        values.append(domain[offset])
    values.reverse()
    return values


def generate_triples(
    gen: Generator,
    n: int,
    seed: int,
    policy: str = "non_empty_only",
    weight_by_golden: bool = False,
) -> list[SynthTriple]:
    """Sample up to ``n`` distinct triples without replacement.

    Each draw picks an unexhausted production uniformly, then an unseen slot
    combination uniformly within it. Under ``non_empty_only`` combinations
    with an empty golden set are discarded; under ``over_generate`` they are
    kept, trading precision for recall in the training corpus.

    ``weight_by_golden`` switches to sampling combinations with probability
    proportional to their golden-set size (which enumerates the whole slot
    space up front; use on small grammars).
    """
    if policy not in ("non_empty_only", "over_generate"):
        raise GrammarError(f"unknown generation policy {policy!r}")
    if n < 0:
        raise GrammarError("n must be >= 0")
    rng = random.Random(seed)
    if weight_by_golden:
        return _generate_weighted(gen, n, rng)
    orders: list[list[int]] = []
    for item in gen.compiled:
        order = list(range(item.size))
        rng.shuffle(order)
        orders.append(order)
    cursors = [0] * len(orders)
    active = [i for i, item in enumerate(gen.compiled) if item.size > 0]

    products = gen.kb.products
    out: list[SynthTriple] = []
    seen: set[tuple[str, LogicalForm]] = set()
    while len(out) < n and active:
        pick = active[rng.randrange(len(active))]
        item = gen.compiled[pick]
        combo = orders[pick][cursors[pick]]
        cursors[pick] += 1
        if cursors[pick] >= item.size:
            active.remove(pick)
        values = _decode_index(combo, item.domains)
        query, form, alignment = realize(item.production, values)
        golden = linear_scan(form, products)
        if policy == "non_empty_only" and not golden:
            continue
        key = (query, form)
        if key in seen:
            continue
        seen.add(key)
        out.append(
            SynthTriple(
                query=query,
                form=form,
                golden=golden,
                production=item.production.name,
                alignment=alignment,
            )
        )
    return out


def _generate_weighted(gen: Generator, n: int, rng: random.Random) -> list[SynthTriple]:
    # enumerate everything, then draw without replacement with probability
    # proportional to golden-set size (empty combinations carry no weight)
    candidates: list[SynthTriple] = []
    seen: set[tuple[str, LogicalForm]] = set()
    for item in gen.compiled:
        for combo in range(item.size):
            values = _decode_index(combo, item.domains)
            query, form, alignment = realize(item.production, values)
            golden = linear_scan(form, gen.kb.products)
            key = (query, form)
            if not golden or key in seen:
                continue
            seen.add(key)
            candidates.append(
                SynthTriple(query, form, golden, item.production.name, alignment)
            )
    out: list[SynthTriple] = []
    weights = [len(t.golden) for t in candidates]
    while candidates and len(out) < n:
        total = sum(weights)
        pick = rng.uniform(0, total)
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if pick <= acc:
                break
        out.append(candidates.pop(i))
        weights.pop(i)
    return out


def augment_synonyms(
    triples: Sequence[SynthTriple],
    synonyms: Mapping[str, Sequence[str]],
    vocab: Optional[Mapping[str, frozenset[str]]] = None,
    counters: Optional[dict[str, int]] = None,
) -> list[SynthTriple]:
    """Add surface variants by substituting slot tokens with their aliases.

    ``synonyms`` maps an alias token to the canonical tokens it stands for
    (e.g. ``sneakers -> [shoes]``); the inverse direction drives substitution.
    Forms, golden sets and alignments are untouched. An alias that is itself
    a vocabulary token of a *different* kind would corrupt training labels,
    so that substitution is skipped and counted under ``counters["skipped"]``.
    """
    inverse: dict[str, list[str]] = {}
    for alias, canonicals in sorted(synonyms.items()):
        if len(tokenize(alias)) != 1:
            raise GrammarError(f"synonym alias {alias!r} must be a single token")
        for canonical in canonicals:
            inverse.setdefault(canonical, []).append(alias)

    # Which kinds does a surface token belong to? Derived from the explicit
    # vocabulary when given, otherwise from the triples' own alignments.
    token_kinds: dict[str, set[str]] = {}
    if vocab is not None:
        for kind, values in vocab.items():
            for value in values:
                for token in value.split(" "):
                    token_kinds.setdefault(token, set()).add(kind)
    else:
        for triple in triples:
            tokens = triple.query.split(" ")
            for token_index, atom_index in triple.alignment:
                atom = triple.form.atoms[atom_index]
                if isinstance(atom, Predicate):
                    token_kinds.setdefault(tokens[token_index], set()).add(atom.kind)

    out = list(triples)
    seen = {(t.query, t.form) for t in triples}
    skipped = 0
    for triple in triples:
        tokens = triple.query.split(" ")
        atom_of_token = {ti: ai for ti, ai in triple.alignment}
        for position, token in enumerate(tokens):
            if token not in inverse or position not in atom_of_token:
                continue
            atom = triple.form.atoms[atom_of_token[position]]
            if not isinstance(atom, Predicate):
                continue
            for alias in inverse[token]:
                alias_kinds = token_kinds.get(alias, set())
                if alias_kinds - {atom.kind}:
                    skipped += 1
                    continue
                new_tokens = list(tokens)
                new_tokens[position] = alias
                query = " ".join(new_tokens)
                key = (query, triple.form)
                if key in seen:
                    continue
                seen.add(key)
                out.append(
                    SynthTriple(
                        query=query,
                        form=triple.form,
                        golden=triple.golden,
                        production=triple.production,
                        alignment=triple.alignment,
                    )
                )
    if counters is not None:
        counters["skipped"] = counters.get("skipped", 0) + skipped
    return out


# --- triple dataset I/O (one JSON record per line) ---------------------------

def triple_to_dict(triple: SynthTriple) -> dict:
    from .forms import atoms_to_json

    return {
        "query": triple.query,
        "atoms": atoms_to_json(triple.form),
        "golden": sorted(triple.golden),
        "production": triple.production,
        "alignment": [list(pair) for pair in triple.alignment],
    }


def triple_from_dict(data: dict) -> SynthTriple:
    from .forms import atoms_from_json

    return SynthTriple(
        query=data["query"],
        form=atoms_from_json(data["atoms"]),
        golden=frozenset(data["golden"]),
        production=data["production"],
        alignment=tuple((ti, ai) for ti, ai in data["alignment"]),
    )


def save_triples(triples: Iterable[SynthTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for triple in triples:
            fh.write(json.dumps(triple_to_dict(triple), sort_keys=True) + "\n")


def load_triples(path: str | Path) -> list[SynthTriple]:
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                triples.append(triple_from_dict(json.loads(line)))
    return triples


def dataset_hash(triples: Sequence[SynthTriple]) -> str:
    digest = hashlib.sha256()
    for triple in triples:
        digest.update(json.dumps(triple_to_dict(triple), sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:16]
