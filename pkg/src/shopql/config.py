"""Declarative engine configuration.

One YAML document describes a shop: its tag schema and seeds, the similarity
entries behind fallback, the ordered tagging strategies, and the optional
grammar / generation / training / routing sections. See
``configs/shop_a.yaml`` for a fully commented example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import yaml

from .catalog import (
    ConfigStrategy,
    ExtractionStrategy,
    HeuristicStrategy,
    ModelStrategy,
    TagSchema,
)
from .errors import ConfigError
from .plans import DEFAULT_TEMPLATES, FallbackPolicy
from .tagger import TrainingConfig
from .vsm import RouterConfig


@dataclass(frozen=True)
class GenerationConfig:
    n: int = 10000
    seed: int = 7
    policy: str = "non_empty_only"


@dataclass(frozen=True)
class SuggestionConfig:
    limit: int = 2000
    head_blend: float = 0.5  # share of head entries when a query log exists


@dataclass(frozen=True)
class EngineConfig:
    schema: TagSchema
    strategies: tuple[ExtractionStrategy, ...]
    grammar_path: Optional[Path]
    grammar_text: Optional[str]
    synonyms: Mapping[str, tuple[str, ...]]
    generation: GenerationConfig
    training: TrainingConfig
    router: RouterConfig
    fallback: FallbackPolicy
    ranking_weights: Mapping[str, float]
    popularity_column: Optional[str]
    suggestions: SuggestionConfig
    fixture: Optional[Mapping] = None
    raw: Mapping = field(default_factory=dict)


def _parse_schema(section: Mapping) -> TagSchema:
    kinds = tuple(section.get("kinds", ()))
    if not kinds:
        raise ConfigError("schema.kinds must list at least one tag kind")
    seeds = {
        kind: frozenset(str(v).lower() for v in values)
        for kind, values in (section.get("vocab_seeds") or {}).items()
    }
    similarity: dict[tuple[str, str, str], float] = {}
    for kind, entries in (section.get("similarity") or {}).items():
        for entry in entries:
            if len(entry) != 3:
                raise ConfigError(f"similarity entry must be [value, value, distance]: {entry}")
            a, b, dist = str(entry[0]).lower(), str(entry[1]).lower(), float(entry[2])
            key = (kind, *sorted((a, b)))
            similarity[key] = dist
    return TagSchema(kinds=kinds, vocab_seeds=seeds, similarity=similarity)


def _parse_strategies(items: Sequence[Mapping]) -> tuple[ExtractionStrategy, ...]:
    strategies: list[ExtractionStrategy] = []
    for item in items:
        tag = item.get("tag")
        kind = item.get("type")
        if not tag or not kind:
            raise ConfigError(f"strategy needs 'tag' and 'type': {item}")
        if kind == "config":
            strategies.append(ConfigStrategy(tag=tag, source_column=item["source"]))
        elif kind == "heuristic":
            strategies.append(
                HeuristicStrategy(
                    tag=tag,
                    rule_name=item.get("rule", "first_noun_overlap"),
                    params=dict(item.get("params") or {}),
                )
            )
        elif kind == "model":
            strategies.append(ModelStrategy(tag=tag, endpoint_id=item["endpoint"]))
        else:
            raise ConfigError(f"unknown strategy type {kind!r} for tag {tag}")
    return tuple(strategies)


def parse_engine_config(text: str, base_dir: Optional[Path] = None) -> EngineConfig:
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("config document must be a key-value tree")

    schema = _parse_schema(doc.get("schema") or {})
    strategies = _parse_strategies(doc.get("strategies") or ())

    grammar = doc.get("grammar") or {}
    grammar_path = None
    grammar_text = grammar.get("text")
    if grammar.get("file"):
        grammar_path = Path(grammar["file"])
        if base_dir and not grammar_path.is_absolute():
            grammar_path = base_dir / grammar_path

    synonyms = {
        str(alias).lower(): tuple(str(c).lower() for c in canonicals)
        for alias, canonicals in (doc.get("synonyms") or {}).items()
    }

    gen = doc.get("generation") or {}
    generation = GenerationConfig(
        n=int(gen.get("n", 10000)),
        seed=int(gen.get("seed", 7)),
        policy=str(gen.get("policy", "non_empty_only")),
    )

    tr = doc.get("training") or {}
    training = TrainingConfig(
        seed=int(tr.get("seed", 13)),
        epochs=int(tr.get("epochs", 5)),
        calibration_split=float(tr.get("calibration_split", 0.1)),
        use_prev_next=bool(tr.get("use_prev_next", True)),
        use_shape=bool(tr.get("use_shape", True)),
        use_gazetteer=bool(tr.get("use_gazetteer", True)),
    )

    rt = doc.get("router") or {}
    router = RouterConfig(
        threshold=float(rt.get("threshold", 0.5)),
        k=int(rt.get("k", 10)),
        fields=tuple(rt.get("fields", ("Name", "Description"))),
    )

    fb = doc.get("fallback") or {}
    templates = dict(DEFAULT_TEMPLATES)
    templates.update(fb.get("templates") or {})
    fallback = FallbackPolicy(
        priority=tuple(fb.get("priority", ())),
        relax=dict(fb.get("relax") or {}),
        drop=dict(fb.get("drop") or {}),
        max_steps=int(fb.get("max_steps", 3)),
        templates=templates,
    )

    ranking = doc.get("ranking") or {}
    weights = {str(k): float(v) for k, v in (ranking.get("weights") or {"popularity": 1.0}).items()}

    signals = doc.get("signals") or {}
    popularity_column = signals.get("popularity_column")

    sg = doc.get("suggestions") or {}
    suggestions = SuggestionConfig(
        limit=int(sg.get("limit", 2000)),
        head_blend=float(sg.get("head_blend", 0.5)),
    )

    return EngineConfig(
        schema=schema,
        strategies=strategies,
        grammar_path=grammar_path,
        grammar_text=grammar_text,
        synonyms=synonyms,
        generation=generation,
        training=training,
        router=router,
        fallback=fallback,
        ranking_weights=weights,
        popularity_column=popularity_column,
        suggestions=suggestions,
        fixture=doc.get("fixture"),
        raw=doc,
    )


def load_engine_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_engine_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
