"""Catalog ingestion and symbolic knowledge-base construction.

A catalog file is promoted to an immutable :class:`KnowledgeBase` by running
declarative tagging strategies in series. Strategies come in three flavours:

* ``config`` — copy a catalog column verbatim (deterministic, per shop),
* ``heuristic`` — a named domain rule (currently ``first_noun_overlap``),
* ``model`` — delegate to an external tagging endpoint (a bundled fake
  answers from a lookup table, so the pipeline runs without any ML service).

Strategies run in declaration order and the first strategy that produces a
value for a (product, kind) wins; later strategies never overwrite it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .errors import CatalogError, ConfigError
from .text import canonical_value, fold_plural, tokenize

SORTAL = "SORTAL"
PRICE = "PRICE"
DEFAULT_KINDS = (SORTAL, "BRAND", "COLOR", "MATERIAL", "GENDER", PRICE)

# (kind, value, value) -> distance in [0, 1]
SimilarityTable = Mapping[tuple[str, str, str], float]


@dataclass(frozen=True)
class TagSchema:
    """The attribute kinds the shop reasons about, plus an optional
    value-similarity relation used by the fallback ladder."""

    kinds: tuple[str, ...] = DEFAULT_KINDS
    vocab_seeds: Mapping[str, frozenset[str]] = field(default_factory=dict)
    similarity: SimilarityTable = field(default_factory=dict)

    def __post_init__(self) -> None:
        lowered = [k.lower() for k in self.kinds]
        if len(set(lowered)) != len(lowered):
            raise ConfigError(f"duplicate tag kinds (case-insensitive): {self.kinds}")
        for (kind, a, b), dist in self.similarity.items():
            if kind not in self.kinds:
                raise ConfigError(f"similarity entry references unknown kind {kind!r}")
            if not 0.0 <= dist <= 1.0:
                raise ConfigError(f"similarity({kind},{a},{b})={dist} outside [0,1]")
            if a == b and dist != 0.0:
                raise ConfigError(f"similarity diagonal must be zero, got {dist} for {a!r}")

    @property
    def categorical_kinds(self) -> tuple[str, ...]:
        return tuple(k for k in self.kinds if k != PRICE)

    def is_categorical(self, kind: str) -> bool:
        return kind in self.kinds and kind != PRICE

    def neighbors(self, kind: str, value: str) -> list[tuple[str, float]]:
        """Similarity neighbors of ``value``, nearest first (ties alphabetical)."""
        found: dict[str, float] = {}
        for (k, a, b), dist in self.similarity.items():
            if k != kind:
                continue
            if a == value and b != value:
                found[b] = min(dist, found.get(b, 2.0))
            elif b == value and a != value:
                found[a] = min(dist, found.get(a, 2.0))
        return sorted(found.items(), key=lambda item: (item[1], item[0]))


@dataclass(frozen=True)
class ConfigStrategy:
    """Tag values come straight from a catalog column. Multi-valued cells
    use '|' as separator."""

    tag: str
    source_column: str


@dataclass(frozen=True)
class HeuristicStrategy:
    tag: str
    rule_name: str
    params: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelStrategy:
    """Tagging is delegated to an endpoint; see :func:`extract_tags` for the
    request/response contract."""

    tag: str
    endpoint_id: str


ExtractionStrategy = ConfigStrategy | HeuristicStrategy | ModelStrategy

# endpoint_id -> callable({"sku":..., "raw": {...}}) -> {"kind":..., "values":[...], "confidence":...}
ModelResolver = Callable[[str], Callable[[dict], dict]]


@dataclass(frozen=True)
class Product:
    sku: str
    raw: Mapping[str, str]
    tags: Mapping[str, frozenset[str]]
    price: Optional[float]


@dataclass(frozen=True)
class Catalog:
    """Raw catalog rows, untagged."""

    columns: tuple[str, ...]
    rows: tuple[Mapping[str, str], ...]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class BuildReport:
    product_count: int
    untyped_count: int
    model_skipped: int
    priceless_count: int
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class KnowledgeBase:
    schema: TagSchema
    products: tuple[Product, ...]
    vocab: Mapping[str, frozenset[str]]
    inverted: Mapping[tuple[str, str], frozenset[str]]
    untyped: frozenset[str]
    fingerprint: str
    report: BuildReport

    def by_sku(self, sku: str) -> Product:
        return self._sku_map[sku]

    @property
    def _sku_map(self) -> Mapping[str, Product]:
        cached = getattr(self, "_sku_cache", None)
        if cached is None:
            cached = {p.sku: p for p in self.products}
            object.__setattr__(self, "_sku_cache", cached)
        return cached

    def prices(self) -> list[float]:
        return sorted(p.price for p in self.products if p.price is not None)


def load_catalog(path: str | Path, fmt: str = "auto") -> Catalog:
    """Read a delimited catalog file.

    The delimiter (tab or comma) is auto-detected from the header line unless
    ``fmt`` forces ``"csv"`` or ``"tsv"``. The header must contain ``sku``.
    """
    path = Path(path)
    if not path.exists():
        raise CatalogError(f"catalog file not found: {path}")
    text = path.read_text(encoding="utf-8")
    return parse_catalog(text, fmt=fmt, source=str(path))


def parse_catalog(text: str, fmt: str = "auto", source: str = "<string>") -> Catalog:
    lines = text.splitlines()
    if not lines:
        raise CatalogError(f"{source}: empty catalog file")
    header_line = lines[0]
    if fmt == "auto":
        delimiter = "\t" if "\t" in header_line else ","
    elif fmt in ("csv", "tsv"):
        delimiter = "\t" if fmt == "tsv" else ","
    else:
        raise CatalogError(f"unknown catalog format {fmt!r}")

    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    columns = tuple(col.strip() for col in next(reader))
    if "sku" not in columns:
        raise CatalogError(f"{source}: catalog header must contain a 'sku' column")

    rows: list[Mapping[str, str]] = []
    seen: set[str] = set()
    for lineno, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != len(columns):
            raise CatalogError(
                f"{source}:{lineno}: expected {len(columns)} fields, got {len(record)}"
            )
        row = dict(zip(columns, (cell.strip() for cell in record)))
        sku = row["sku"]
        if not sku:
            raise CatalogError(f"{source}:{lineno}: empty sku")
        if sku in seen:
            raise CatalogError(f"{source}:{lineno}: duplicate sku {sku!r}")
        seen.add(sku)
        rows.append(row)
    return Catalog(columns=columns, rows=tuple(rows))


def heuristic_first_overlap(
    description: str, category: str, lexicon: Sequence[str]
) -> Optional[str]:
    """First description token that names a known object type and also
    string-overlaps the category field.

    Tokens are lowercased, punctuation-stripped and plural-folded against the
    lexicon before matching. Total function: returns None when nothing hits.
    """
    lexset = set(lexicon)
    cat = category.lower()
    for token in tokenize(description):
        candidate = token if token in lexset else fold_plural(token, lexset)
        if candidate in lexset and (candidate in cat or token in cat):
            return candidate
    return None


_HEURISTIC_RULES = {"first_noun_overlap"}


def extract_tags(
    catalog: Catalog,
    schema: TagSchema,
    strategies: Sequence[ExtractionStrategy],
    model_resolver: Optional[ModelResolver] = None,
) -> KnowledgeBase:
    """Run tagging strategies in series and freeze the result.

    Config strategies are validated up front (a missing source column is a
    configuration error before any work happens). A model endpoint that
    cannot be reached skips tagging for that product and is counted in the
    build report instead of failing the build.
    """
    warnings: list[str] = []
    for strategy in strategies:
        if strategy.tag not in schema.kinds:
            raise ConfigError(f"strategy references unknown kind {strategy.tag!r}")
        if isinstance(strategy, ConfigStrategy) and strategy.source_column not in catalog.columns:
            raise ConfigError(
                f"config strategy for {strategy.tag} references missing column "
                f"{strategy.source_column!r}"
            )
        if isinstance(strategy, HeuristicStrategy) and strategy.rule_name not in _HEURISTIC_RULES:
            raise ConfigError(f"unknown heuristic rule {strategy.rule_name!r}")
    covered = {s.tag for s in strategies}
    for kind in schema.kinds:
        if kind not in covered:
            warnings.append(f"no strategy covers kind {kind}; products get no {kind} tags")

    model_clients: dict[str, Callable[[dict], dict]] = {}
    model_skipped = 0
    priceless = 0

    raw_tags: list[dict[str, list[str]]] = []
    prices: list[Optional[float]] = []
    for row in catalog.rows:
        tags: dict[str, list[str]] = {}
        price: Optional[float] = None
        for strategy in strategies:
            kind = strategy.tag
            if kind in tags or (kind == PRICE and price is not None):
                continue  # first writer wins
            values: list[str] = []
            if isinstance(strategy, ConfigStrategy):
                cell = row.get(strategy.source_column, "")
                if kind == PRICE:
                    try:
                        price = float(cell)
                        if price < 0:
                            raise ValueError
                    except ValueError:
                        price = None
                        priceless += 1
                    continue
                values = [canonical_value(v) for v in cell.split("|") if canonical_value(v)]
            elif isinstance(strategy, HeuristicStrategy):
                params = strategy.params
                lexicon = params.get("lexicon") or sorted(
                    schema.vocab_seeds.get(kind, frozenset())
                )
                hit = heuristic_first_overlap(
                    row.get(params.get("description_column", "Description"), ""),
                    row.get(params.get("category_column", "Category"), ""),
                    lexicon,
                )
                values = [hit] if hit else []
            else:
                client = model_clients.get(strategy.endpoint_id)
                if client is None:
                    if model_resolver is None:
                        model_skipped += 1
                        continue
                    try:
                        client = model_resolver(strategy.endpoint_id)
                    except Exception:
                        model_skipped += 1
                        continue
                    model_clients[strategy.endpoint_id] = client
                try:
                    response = client({"sku": row["sku"], "raw": dict(row)})
                except Exception:
                    model_skipped += 1
                    continue
                if response.get("kind", kind) != kind:
                    warnings.append(
                        f"model endpoint {strategy.endpoint_id} answered for kind "
                        f"{response.get('kind')!r}, expected {kind!r}; ignored"
                    )
                    continue
                values = [canonical_value(v) for v in response.get("values", []) if v]
            if values:
                tags[kind] = values
        raw_tags.append(tags)
        prices.append(price)

    # Plural folding is a second pass so it cannot depend on row order:
    # a value folds only when its singular is already a seed or a collected value.
    known: dict[str, set[str]] = {
        kind: set(schema.vocab_seeds.get(kind, frozenset())) for kind in schema.kinds
    }
    for tags in raw_tags:
        for kind, values in tags.items():
            known[kind].update(values)

    products: list[Product] = []
    vocab: dict[str, set[str]] = {k: set() for k in schema.categorical_kinds}
    inverted: dict[tuple[str, str], set[str]] = {}
    untyped: set[str] = set()
    for row, tags, price in zip(catalog.rows, raw_tags, prices):
        folded: dict[str, frozenset[str]] = {}
        for kind, values in tags.items():
            vals = frozenset(fold_plural(v, known[kind]) for v in values)
            folded[kind] = vals
            vocab[kind].update(vals)
            for v in vals:
                inverted.setdefault((kind, v), set()).add(row["sku"])
        if SORTAL in schema.kinds and SORTAL not in folded:
            untyped.add(row["sku"])
        products.append(Product(sku=row["sku"], raw=dict(row), tags=folded, price=price))

    frozen_vocab = {k: frozenset(v) for k, v in vocab.items()}
    for (kind, a, b), _ in schema.similarity.items():
        for value in (a, b):
            if value not in frozen_vocab.get(kind, frozenset()):
                raise ConfigError(
                    f"similarity entry references {kind} value {value!r} "
                    "that no product carries"
                )

    report = BuildReport(
        product_count=len(products),
        untyped_count=len(untyped),
        model_skipped=model_skipped,
        priceless_count=priceless,
        warnings=tuple(warnings),
    )
    return KnowledgeBase(
        schema=schema,
        products=tuple(products),
        vocab=frozen_vocab,
        inverted={k: frozenset(v) for k, v in inverted.items()},
        untyped=frozenset(untyped),
        fingerprint=schema_fingerprint(schema.kinds, frozen_vocab),
        report=report,
    )


def vocabulary(kb: KnowledgeBase, kind: str) -> frozenset[str]:
    if kind not in kb.schema.kinds:
        raise ConfigError(f"unknown kind {kind!r}")
    if kind == PRICE:
        raise ConfigError("PRICE is numeric-valued and has no vocabulary")
    return kb.vocab.get(kind, frozenset())


def schema_fingerprint(kinds: Sequence[str], vocab: Mapping[str, frozenset[str]]) -> str:
    payload = json.dumps(
        {"kinds": sorted(kinds), "vocab": {k: sorted(v) for k, v in sorted(vocab.items())}},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def rebuild_inverted(products: Sequence[Product]) -> dict[tuple[str, str], frozenset[str]]:
    """Reference rebuild of the inverted index from product tags."""
    fresh: dict[tuple[str, str], set[str]] = {}
    for product in products:
        for kind, values in product.tags.items():
            for value in values:
                fresh.setdefault((kind, value), set()).add(product.sku)
    return {k: frozenset(v) for k, v in fresh.items()}


def lookup_tag_service(table: Mapping[str, tuple[str, Sequence[str]]]) -> Callable[[dict], dict]:
    """Bundled fake for the model-strategy wire contract: answers from a
    ``sku -> (kind, values)`` lookup table."""

    def respond(request: dict) -> dict:
        sku = request["sku"]
        if sku not in table:
            return {"kind": None, "values": [], "confidence": 0.0}
        kind, values = table[sku]
        return {"kind": kind, "values": list(values), "confidence": 1.0}

    return respond


# --- snapshot serialization -------------------------------------------------

def kb_to_dict(kb: KnowledgeBase) -> dict:
    return {
        "schema": {
            "kinds": list(kb.schema.kinds),
            "vocab_seeds": {k: sorted(v) for k, v in sorted(kb.schema.vocab_seeds.items())},
            "similarity": [
                [kind, a, b, dist]
                for (kind, a, b), dist in sorted(kb.schema.similarity.items())
            ],
        },
        "products": [
            {
                "sku": p.sku,
                "raw": dict(p.raw),
                "tags": {k: sorted(v) for k, v in sorted(p.tags.items())},
                "price": p.price,
            }
            for p in kb.products
        ],
        "untyped": sorted(kb.untyped),
        "fingerprint": kb.fingerprint,
        "report": {
            "product_count": kb.report.product_count,
            "untyped_count": kb.report.untyped_count,
            "model_skipped": kb.report.model_skipped,
            "priceless_count": kb.report.priceless_count,
            "warnings": list(kb.report.warnings),
        },
    }


def kb_from_dict(data: dict) -> KnowledgeBase:
    schema = TagSchema(
        kinds=tuple(data["schema"]["kinds"]),
        vocab_seeds={k: frozenset(v) for k, v in data["schema"]["vocab_seeds"].items()},
        similarity={(k, a, b): d for k, a, b, d in data["schema"]["similarity"]},
    )
    products = tuple(
        Product(
            sku=p["sku"],
            raw=p["raw"],
            tags={k: frozenset(v) for k, v in p["tags"].items()},
            price=p["price"],
        )
        for p in data["products"]
    )
    vocab: dict[str, set[str]] = {k: set() for k in schema.categorical_kinds}
    for product in products:
        for kind, values in product.tags.items():
            vocab[kind].update(values)
    report = BuildReport(**data["report"])
    return KnowledgeBase(
        schema=schema,
        products=products,
        vocab={k: frozenset(v) for k, v in vocab.items()},
        inverted=rebuild_inverted(products),
        untyped=frozenset(data["untyped"]),
        fingerprint=data["fingerprint"],
        report=report,
    )


def save_kb(kb: KnowledgeBase, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(kb_to_dict(kb), sort_keys=True, indent=None, separators=(",", ":")),
        encoding="utf-8",
    )


def load_kb(path: str | Path) -> KnowledgeBase:
    return kb_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
