from pathlib import Path

import pytest

from shopql.catalog import ConfigStrategy, HeuristicStrategy, ModelStrategy
from shopql.config import load_engine_config, parse_engine_config
from shopql.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_fixture_config_loads(fixture_config):
    assert fixture_config.schema.kinds == ("SORTAL", "BRAND", "COLOR", "MATERIAL", "GENDER", "PRICE")
    assert isinstance(fixture_config.strategies[0], ConfigStrategy)
    assert any(isinstance(s, HeuristicStrategy) for s in fixture_config.strategies)
    assert fixture_config.grammar_path and fixture_config.grammar_path.exists()
    assert fixture_config.synonyms["sneakers"] == ("shoes",)
    assert fixture_config.router.threshold == 0.5
    assert fixture_config.fallback.priority[0] == "COLOR"
    assert fixture_config.fixture["products"] == 1000


def test_shop_a_example_config_loads():
    config = load_engine_config(CONFIGS / "shop_a.yaml")
    kinds = {s.tag: type(s) for s in config.strategies}
    assert kinds["BRAND"] is ConfigStrategy
    assert kinds["COLOR"] is ModelStrategy
    assert kinds["SORTAL"] is HeuristicStrategy
    assert config.grammar_text


def test_similarity_normalized_symmetric(fixture_config):
    schema = fixture_config.schema
    assert schema.neighbors("COLOR", "purple")[0] == ("dark red", 0.2)
    assert ("purple", 0.2) in schema.neighbors("COLOR", "dark red")


def test_defaults_applied_for_missing_sections():
    config = parse_engine_config("schema: {kinds: [SORTAL, PRICE]}")
    assert config.router.k == 10
    assert config.training.epochs == 5
    assert config.generation.policy == "non_empty_only"
    assert config.fallback.max_steps == 3
    assert config.ranking_weights == {"popularity": 1.0}


def test_invalid_yaml_rejected():
    with pytest.raises(ConfigError):
        parse_engine_config("schema: [unbalanced")


def test_non_mapping_document_rejected():
    with pytest.raises(ConfigError):
        parse_engine_config("- just\n- a list\n")


def test_missing_kinds_rejected():
    with pytest.raises(ConfigError):
        parse_engine_config("schema: {}")


def test_unknown_strategy_type_rejected():
    with pytest.raises(ConfigError, match="magic"):
        parse_engine_config(
            "schema: {kinds: [SORTAL, PRICE]}\nstrategies:\n  - {tag: SORTAL, type: magic}\n"
        )


def test_bad_similarity_entry_rejected():
    with pytest.raises(ConfigError):
        parse_engine_config(
            "schema:\n  kinds: [COLOR, PRICE]\n  similarity:\n    COLOR:\n      - [a, b]\n"
        )


def test_grammar_path_resolved_relative_to_config(tmp_path):
    (tmp_path / "g.txt").write_text("[SORTAL]\n")
    (tmp_path / "c.yaml").write_text(
        "schema: {kinds: [SORTAL, PRICE]}\ngrammar: {file: g.txt}\n"
    )
    config = load_engine_config(tmp_path / "c.yaml")
    assert config.grammar_path == tmp_path / "g.txt"
