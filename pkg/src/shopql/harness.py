"""Desk-scale evaluation harness.

Three jobs: generate synthetic catalogs with known ground truth (including
the branded-accessory distractors that make pure keyword retrieval return
wrong-type items for head queries), model query streams as power laws over
the distinct grammar queries, and run both engines side by side into a
reproducible comparison report.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .catalog import SORTAL, KnowledgeBase
from .errors import ConfigError
from .forms import LogicalForm
from .plans import FallbackPolicy
from .tagger import ParserModel
from .vsm import RouterConfig, SparseIndex, route, search_bm25

SORTALS = (
    "shoes", "shirts", "trousers", "gloves", "hats", "jackets", "dresses",
    "skirts", "scarves", "belts", "boots", "socks", "bags", "consoles", "pens",
)
BRANDS = (
    "prada", "gucci", "nike", "adidas", "puma", "reebok", "levis", "zara",
    "diesel", "lacoste", "armani", "versace", "new balance", "hugo boss",
    "fila", "kappa", "umbro", "nintendo", "sony", "champion",
)
COLORS = (
    "purple", "dark red", "red", "blue", "navy blue", "green", "black",
    "white", "yellow", "orange", "pink", "grey",
)
MATERIALS = ("leather", "cotton", "wool", "silk", "denim", "suede", "linen", "polyester")
GENDERS = ("men", "women", "kids")

_ADJECTIVES = (
    "classic", "elegant", "durable", "lightweight", "comfortable",
    "sporty", "casual", "premium", "stylish", "modern",
)
_FILLERS = (
    "Everyday essential with timeless appeal.",
    "Designed for comfort and built to last.",
    "A wardrobe staple crafted with care.",
    "Finished with subtle detailing.",
)


@dataclass(frozen=True)
class DistractorSpec:
    """Head-brand accessory construction: a few genuine items plus branded
    accessories whose text mentions the same head terms."""

    brand: str = "nintendo"
    hook: str = "switch"
    target_sortal: str = "consoles"
    accessory_sortal: str = "pens"
    target_count: int = 8
    accessory_count: int = 15


@dataclass(frozen=True)
class FixtureSpec:
    products: int = 1000
    sortals: int = 15
    brands: int = 20
    colors: int = 12
    materials: int = 8
    genders: int = 3
    price_range: tuple[float, float] = (5.0, 500.0)
    distractors: Optional[DistractorSpec] = DistractorSpec()
    exclude_pairs: tuple[tuple[str, str], ...] = ()  # (sortal, color) never combined
    ensure_pairs: tuple[tuple[str, str], ...] = ()  # (sortal, color) forced to exist

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "FixtureSpec":
        distractors: Optional[DistractorSpec] = DistractorSpec()
        if "distractors" in doc:
            section = doc["distractors"]
            distractors = DistractorSpec(**section) if section else None
        return cls(
            products=int(doc.get("products", 1000)),
            sortals=int(doc.get("sortals", 15)),
            brands=int(doc.get("brands", 20)),
            colors=int(doc.get("colors", 12)),
            materials=int(doc.get("materials", 8)),
            genders=int(doc.get("genders", 3)),
            price_range=tuple(doc.get("price_range", (5.0, 500.0))),  # type: ignore[arg-type]
            distractors=distractors,
            exclude_pairs=tuple((s, c) for s, c in doc.get("exclude_pairs", ())),
            ensure_pairs=tuple((s, c) for s, c in doc.get("ensure_pairs", ())),
        )


_COLUMNS = (
    "sku", "Name", "Description", "Manufacturer", "Category",
    "Color", "Material", "Gender", "Price", "Popularity",
)


def make_fixture_catalog(spec: FixtureSpec, seed: int, path: str | Path) -> Path:
    """Write a deterministic synthetic catalog.

    Ground-truth tags appear both as structured columns and inside the
    Description text, so the tagging strategies and the keyword index see
    the same facts. The first rows cycle through every palette value, which
    pins the extracted vocabularies (and the schema fingerprint) regardless
    of catalog size.
    """
    for name, requested, palette in (
        ("sortals", spec.sortals, SORTALS),
        ("brands", spec.brands, BRANDS),
        ("colors", spec.colors, COLORS),
        ("materials", spec.materials, MATERIALS),
        ("genders", spec.genders, GENDERS),
    ):
        if requested > len(palette):
            raise ConfigError(
                f"fixture spec asks for {requested} {name}, palette has {len(palette)}"
            )
    sortals = SORTALS[: spec.sortals]
    brands = BRANDS[: spec.brands]
    colors = COLORS[: spec.colors]
    materials = MATERIALS[: spec.materials]
    genders = GENDERS[: spec.genders]
    excluded = set(spec.exclude_pairs)

    distractor_rows = 0
    if spec.distractors:
        d = spec.distractors
        if d.target_sortal not in sortals or d.accessory_sortal not in sortals:
            raise ConfigError("distractor sortals must be inside the requested sortal vocab")
        if d.brand not in brands:
            raise ConfigError("distractor brand must be inside the requested brand vocab")
        distractor_rows = d.target_count + d.accessory_count
    base_rows = spec.products - distractor_rows
    if base_rows < 0:
        raise ConfigError("fixture spec smaller than its distractor construction")

    rng = random.Random(seed)
    rows: list[dict[str, str]] = []

    def pick_color(sortal: str) -> str:
        for _ in range(64):
            color = rng.choice(colors)
            if (sortal, color) not in excluded:
                return color
        legal = [c for c in colors if (sortal, c) not in excluded]
        if not legal:
            raise ConfigError(f"every color excluded for sortal {sortal!r}")
        return legal[0]

    def make_row(i: int, sortal: str, brand: str, color: str, material: str, gender: str) -> dict:
        price = round(rng.uniform(*spec.price_range), 2)
        popularity = rng.randint(0, 1000)
        color_cell = color
        if i % 37 == 21:  # occasional two-tone item: multi-valued color tag
            second = pick_color(sortal)
            if second != color:
                color_cell = f"{color}|{second}"
        adjective = _ADJECTIVES[i % len(_ADJECTIVES)]
        filler = _FILLERS[i % len(_FILLERS)]
        description = (
            f"{adjective.capitalize()} {color} {material} {sortal} by {brand} "
            f"for {gender}. {filler}"
        )
        return {
            "sku": f"P{i:05d}",
            "Name": f"{brand} {color} {sortal}",
            "Description": description,
            "Manufacturer": brand,
            "Category": sortal,
            "Color": color_cell,
            "Material": material,
            "Gender": gender,
            "Price": f"{price:.2f}",
            "Popularity": str(popularity),
        }

    for i in range(base_rows):
        # round-robin through every palette first so each value occurs at least once
        sortal = sortals[i % len(sortals)] if i < 4 * len(sortals) else rng.choice(sortals)
        brand = brands[i % len(brands)] if i < 4 * len(brands) else rng.choice(brands)
        material = (
            materials[i % len(materials)] if i < 4 * len(materials) else rng.choice(materials)
        )
        gender = genders[i % len(genders)] if i < 4 * len(genders) else rng.choice(genders)
        if i < 4 * len(colors):
            color = colors[i % len(colors)]
            if (sortal, color) in excluded:
                color = pick_color(sortal)
        else:
            color = pick_color(sortal)
        rows.append(make_row(i, sortal, brand, color, material, gender))

    if spec.distractors:
        d = spec.distractors
        for j in range(d.target_count):
            i = base_rows + j
            row = make_row(i, d.target_sortal, d.brand, pick_color(d.target_sortal),
                           rng.choice(materials), rng.choice(genders))
            row["Description"] = (
                f"{d.brand.capitalize()} {d.hook} gaming {d.target_sortal} "
                "with dock and wireless controllers."
            )
            row["Name"] = f"{d.brand} {d.hook} {d.target_sortal}"
            rows.append(row)
        for j in range(d.accessory_count):
            i = base_rows + d.target_count + j
            row = make_row(i, d.accessory_sortal, d.brand, pick_color(d.accessory_sortal),
                           rng.choice(materials), rng.choice(genders))
            row["Description"] = (
                f"Collectible ballpoint {d.accessory_sortal} with "
                f"{d.brand} {d.hook} branding for fans."
            )
            row["Name"] = f"{d.brand} {d.hook} {d.accessory_sortal}"
            rows.append(row)

    for sortal, color in spec.ensure_pairs:
        if (sortal, color) in excluded:
            raise ConfigError(f"ensure pair {(sortal, color)} is also excluded")
        if any(r["Category"] == sortal and color in r["Color"].split("|") for r in rows):
            continue
        for row in rows:
            if row["Category"] == sortal:
                old_color = row["Color"].split("|")[0]
                row["Color"] = color
                row["Description"] = row["Description"].replace(
                    f" {old_color} ", f" {color} ", 1
                )
                row["Name"] = row["Name"].replace(f" {old_color} ", f" {color} ", 1)
                break

    out = Path(path)
    lines = [",".join(_COLUMNS)]
    for row in rows:
        cells = []
        for column in _COLUMNS:
            cell = row[column]
            cells.append(f'"{cell}"' if "," in cell else cell)
        lines.append(",".join(cells))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


# --- query distribution -------------------------------------------------------

@dataclass(frozen=True)
class QueryDistribution:
    queries: tuple[tuple[str, float], ...]  # (query, probability), rank order
    exponent: float

    def __post_init__(self) -> None:
        if self.queries:
            total = sum(p for _, p in self.queries)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"probabilities sum to {total}, not 1")
            probs = [p for _, p in self.queries]
            if any(a < b - 1e-12 for a, b in zip(probs, probs[1:])):
                raise ValueError("probabilities must be non-increasing in rank")


def fit_powerlaw(counts: Mapping[str, float]) -> QueryDistribution:
    """Least-squares fit of log frequency against log rank.

    The fitted exponent re-parameterizes the same distinct queries as a
    normalized rank-frequency distribution.
    """
    if len(counts) < 10:
        raise ValueError(f"need at least 10 distinct queries, got {len(counts)}")
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    ranks = np.arange(1, len(ordered) + 1, dtype=float)
    freqs = np.array([max(c, 1e-12) for _, c in ordered], dtype=float)
    slope, _ = np.polyfit(np.log(ranks), np.log(freqs), 1)
    exponent = -float(slope)
    mass = ranks ** (-exponent)
    mass /= mass.sum()
    return QueryDistribution(
        queries=tuple((query, float(p)) for (query, _), p in zip(ordered, mass)),
        exponent=exponent,
    )


def sample_query_stream(dist: QueryDistribution, n: int, seed: int) -> list[str]:
    """n i.i.d. draws from the distribution, deterministic under the seed."""
    if not dist.queries:
        raise ValueError("cannot sample from an empty distribution")
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = random.Random(seed)
    queries = [q for q, _ in dist.queries]
    cumulative = []
    acc = 0.0
    for _, p in dist.queries:
        acc += p
        cumulative.append(acc)
    cumulative[-1] = 1.0
    return [queries[bisect.bisect_left(cumulative, rng.random())] for _ in range(n)]


def solve_head_exponent(
    n_distinct: int, head_fraction: float = 0.05, target_mass: float = 0.5
) -> float:
    """Exponent for which the top ``head_fraction`` of ranks carries
    ``target_mass`` of a Zipf distribution (bisection)."""
    head = max(1, int(round(head_fraction * n_distinct)))
    ranks = np.arange(1, n_distinct + 1, dtype=float)

    def head_mass(s: float) -> float:
        weights = ranks ** (-s)
        return float(weights[:head].sum() / weights.sum())

    lo, hi = 0.01, 4.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if head_mass(mid) < target_mass:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def synthetic_query_log(
    queries: Sequence[str],
    seed: int,
    head_queries: Sequence[str] = (),
    max_distinct: int = 1000,
    head_fraction: float = 0.05,
    target_mass: float = 0.5,
    scale: float = 1e6,
) -> dict[str, int]:
    """Zipf-shaped counts over distinct queries; forced head queries take the
    top ranks."""
    rest = sorted(set(queries) - set(head_queries))
    rng = random.Random(seed)
    rng.shuffle(rest)
    ordered = list(head_queries) + rest
    ordered = ordered[:max_distinct]
    exponent = solve_head_exponent(len(ordered), head_fraction, target_mass)
    return {
        query: max(1, round(scale * (rank ** -exponent)))
        for rank, query in enumerate(ordered, start=1)
    }


def head_coverage_curve(dist: QueryDistribution) -> tuple[float, ...]:
    """Cumulative query mass as head size grows; ends at 1.0."""
    acc = 0.0
    curve = []
    for _, p in dist.queries:
        acc += p
        curve.append(round(acc, 12))
    if curve:
        curve[-1] = 1.0
    return tuple(curve)


# --- engine comparison ---------------------------------------------------------

@dataclass(frozen=True)
class EngineComponents:
    kb: KnowledgeBase
    model: ParserModel
    index: SparseIndex
    router: RouterConfig
    policy: FallbackPolicy
    signals: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    weights: Mapping[str, float] = field(default_factory=lambda: {"popularity": 1.0})
    query_forms: Mapping[str, LogicalForm] = field(default_factory=dict)


@dataclass(frozen=True)
class EngineMetrics:
    sortal_precision: Optional[float]
    empty_result_rate: float
    mean_relevance_tier: Optional[float]
    exact_set_accuracy: Optional[float]
    sortal_violations: int
    latency_ms: Mapping[str, float]  # p50/p90/p99, excluded from canonical bytes


@dataclass(frozen=True)
class ComparisonReport:
    schema: str
    seed: Optional[int]
    config_hash: str
    distinct_queries: int
    stream_size: int
    parsed_share: float
    engines: Mapping[str, EngineMetrics]
    head_coverage: tuple[float, ...]

    def to_dict(self, include_timings: bool = False) -> dict:
        engines = {}
        for name, m in sorted(self.engines.items()):
            entry = {
                "sortal_precision": m.sortal_precision,
                "empty_result_rate": m.empty_result_rate,
                "mean_relevance_tier": m.mean_relevance_tier,
                "exact_set_accuracy": m.exact_set_accuracy,
                "sortal_violations": m.sortal_violations,
            }
            if include_timings:
                entry["latency_ms"] = dict(m.latency_ms)
            engines[name] = entry
        return {
            "schema": self.schema,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "distinct_queries": self.distinct_queries,
            "stream_size": self.stream_size,
            "parsed_share": self.parsed_share,
            "engines": engines,
            "head_coverage": list(self.head_coverage),
        }

    def to_json(self, include_timings: bool = False) -> str:
        # timings vary run to run; the canonical document omits them so
        # reruns with fixed seeds are byte-identical
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2)

    def to_text(self) -> str:
        rows = [
            ("metric", "router", "vsm"),
            ("-" * 28, "-" * 12, "-" * 12),
        ]

        def cell(value) -> str:
            if value is None:
                return "n/a"
            if isinstance(value, float):
                return f"{value:.4f}"
            return str(value)

        router, vsm = self.engines["router"], self.engines["vsm"]
        for label, attr in (
            ("sortal precision@10", "sortal_precision"),
            ("empty result rate", "empty_result_rate"),
            ("mean relevance tier", "mean_relevance_tier"),
            ("exact-set accuracy", "exact_set_accuracy"),
            ("sortal violations", "sortal_violations"),
        ):
            rows.append((label, cell(getattr(router, attr)), cell(getattr(vsm, attr))))
        rows.append(("distinct queries", str(self.distinct_queries), ""))
        rows.append(("stream size", str(self.stream_size), ""))
        rows.append(("parsed share", f"{self.parsed_share:.4f}", ""))
        return "\n".join(f"{a:<28} {b:>12} {c:>12}" for a, b, c in rows) + "\n"


def _percentiles(samples: Sequence[float]) -> dict[str, float]:
    if not samples:
        return {"p50": 0.0, "p90": 0.0, "p99": 0.0}
    data = sorted(samples)

    def pct(p: float) -> float:
        idx = min(int(p * len(data)), len(data) - 1)
        return data[idx]

    return {"p50": pct(0.50), "p90": pct(0.90), "p99": pct(0.99)}


def components_hash(components: EngineComponents) -> str:
    payload = json.dumps(
        {
            "router": {
                "threshold": components.router.threshold,
                "k": components.router.k,
                "fields": list(components.router.fields),
            },
            "policy": {
                "priority": list(components.policy.priority),
                "max_steps": components.policy.max_steps,
            },
            "weights": dict(sorted(components.weights.items())),
            "fingerprint": components.kb.fingerprint,
            "dataset": components.model.dataset_hash,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:8]


def compare_engines(
    stream: Sequence[str],
    golden: Mapping[str, frozenset[str]],
    components: EngineComponents,
    seed: Optional[int] = None,
) -> ComparisonReport:
    """Run every stream query through the two-tier router and through pure
    BM25, and aggregate mass-weighted metrics.

    Queries with a known logical form contribute to sortal precision and
    exact-set accuracy; unknown queries only count toward routing shares and
    empty-result rates. The pure-VSM "result set" for exact-set accuracy is
    every positively scoring document — keyword retrieval has no principled
    cutoff, which is rather the point.
    """
    weights_by_query = Counter(stream)
    distinct = sorted(weights_by_query)
    kb, index = components.kb, components.index
    true_sortal = {
        q: form.sortal for q, form in components.query_forms.items() if form.sortal
    }

    router_lat: list[float] = []
    vsm_lat: list[float] = []
    acc: dict[str, dict[str, float]] = {
        "router": {"sp_w": 0.0, "sp": 0.0, "empty": 0.0, "tier_w": 0.0, "tier": 0.0,
                   "ex_w": 0.0, "ex": 0.0, "viol": 0.0, "parsed": 0.0},
        "vsm": {"sp_w": 0.0, "sp": 0.0, "empty": 0.0, "ex_w": 0.0, "ex": 0.0, "viol": 0.0},
    }
    total_mass = float(sum(weights_by_query.values())) or 1.0

    def sortal_hits(skus: Sequence[str], sortal: str) -> float:
        if not skus:
            return 0.0
        good = sum(
            1 for sku in skus if sortal in kb.by_sku(sku).tags.get(SORTAL, frozenset())
        )
        return good / len(skus)

    for query in distinct:
        w = float(weights_by_query[query])
        expected_sortal = true_sortal.get(query)

        t0 = time.perf_counter()
        outcome = route(
            query, components.model, kb, index, components.router,
            components.policy, components.signals, components.weights,
        )
        router_lat.append((time.perf_counter() - t0) * 1000.0)

        r = acc["router"]
        top = [h.sku for h in outcome.hits[:10]]
        if outcome.decision.path == "PARSED":
            r["parsed"] += w
            r["tier_w"] += w
            r["tier"] += w * len(outcome.trace.steps if outcome.trace else ())
            parsed_sortal = outcome.parse.form.sortal if outcome.parse else None
            if parsed_sortal:
                r["viol"] += sum(
                    1
                    for sku in outcome.result_skus
                    if parsed_sortal not in kb.by_sku(sku).tags.get(SORTAL, frozenset())
                )
            if expected_sortal:
                r["sp_w"] += w
                r["sp"] += w * sortal_hits(top, expected_sortal)
        if not outcome.hits:
            r["empty"] += w
        if query in golden:
            r["ex_w"] += w
            r["ex"] += w * (outcome.result_skus == golden[query])

        t0 = time.perf_counter()
        ranked = search_bm25(index, query, k=10)
        vsm_lat.append((time.perf_counter() - t0) * 1000.0)
        full = search_bm25(index, query, k=max(index.doc_count, 1))
        v = acc["vsm"]
        vsm_top = [sku for sku, _ in ranked]
        if expected_sortal:
            v["sp_w"] += w
            v["sp"] += w * sortal_hits(vsm_top, expected_sortal)
        if not ranked:
            v["empty"] += w
        if query in golden:
            v["ex_w"] += w
            v["ex"] += w * (frozenset(sku for sku, _ in full) == golden[query])

    r, v = acc["router"], acc["vsm"]
    engines = {
        "router": EngineMetrics(
            sortal_precision=(r["sp"] / r["sp_w"]) if r["sp_w"] else None,
            empty_result_rate=r["empty"] / total_mass,
            mean_relevance_tier=(r["tier"] / r["tier_w"]) if r["tier_w"] else None,
            exact_set_accuracy=(r["ex"] / r["ex_w"]) if r["ex_w"] else None,
            sortal_violations=int(r["viol"]),
            latency_ms=_percentiles(router_lat),
        ),
        "vsm": EngineMetrics(
            sortal_precision=(v["sp"] / v["sp_w"]) if v["sp_w"] else None,
            empty_result_rate=v["empty"] / total_mass,
            mean_relevance_tier=None,
            exact_set_accuracy=(v["ex"] / v["ex_w"]) if v["ex_w"] else None,
            sortal_violations=0,
            latency_ms=_percentiles(vsm_lat),
        ),
    }
    counts = {q: float(c) for q, c in weights_by_query.items()}
    coverage: tuple[float, ...] = ()
    if len(counts) >= 10:
        coverage = head_coverage_curve(fit_powerlaw(counts))
    elif counts:
        ordered = sorted(counts.values(), reverse=True)
        total = sum(ordered)
        running = 0.0
        curve = []
        for c in ordered:
            running += c / total
            curve.append(round(running, 12))
        curve[-1] = 1.0
        coverage = tuple(curve)

    return ComparisonReport(
        schema="shopql-report/1",
        seed=seed,
        config_hash=components_hash(components),
        distinct_queries=len(distinct),
        stream_size=len(stream),
        parsed_share=r["parsed"] / total_mass,
        engines=engines,
        head_coverage=coverage,
    )


def save_report(report: ComparisonReport, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"report_s{report.seed if report.seed is not None else 'x'}_{report.config_hash}"
    json_path = out / f"{stem}.json"
    text_path = out / f"{stem}.txt"
    json_path.write_text(report.to_json(), encoding="utf-8")
    text_path.write_text(report.to_text(), encoding="utf-8")
    timings = {
        name: dict(metrics.latency_ms) for name, metrics in sorted(report.engines.items())
    }
    (out / f"{stem}.timings.json").write_text(
        json.dumps(timings, sort_keys=True, indent=2), encoding="utf-8"
    )
    return json_path, text_path


def latency_profile(
    queries: Sequence[str], components: EngineComponents
) -> dict[str, dict[str, float]]:
    """End-to-end parsed-search latency and the bare parse-attempt overhead
    that keyword-routed queries pay. Milliseconds."""
    from .tagger import parse

    end_to_end: list[float] = []
    parse_only: list[float] = []
    for query in queries:
        t0 = time.perf_counter()
        route(
            query, components.model, components.kb, components.index,
            components.router, components.policy, components.signals,
            components.weights,
        )
        end_to_end.append((time.perf_counter() - t0) * 1000.0)
        t0 = time.perf_counter()
        try:
            parse(components.model, query)
        except ValueError:
            pass
        parse_only.append((time.perf_counter() - t0) * 1000.0)
    return {"end_to_end": _percentiles(end_to_end), "parse_attempt": _percentiles(parse_only)}
