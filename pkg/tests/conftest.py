"""Shared fixtures: a tiny hand-written catalog for unit tests and a
reduced-size engine built on the bundled 1k fixture for integration tests."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest

from shopql.catalog import extract_tags, load_catalog, parse_catalog
from shopql.config import load_engine_config, parse_engine_config
from shopql.engine import build_engine
from shopql.grammar import parse_production_file

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

MINI_CATALOG = """\
sku,Name,Description,Manufacturer,Category,Color,Material,Gender,Price,Popularity
M001,prada purple shoes,Elegant purple leather shoes by prada for men.,prada,shoes,purple,leather,men,120.00,10
M002,gucci dark red shoes,Classic dark red leather shoes by gucci for women.,gucci,shoes,dark red,leather,women,80.00,50
M003,nike blue shirts,Sporty blue cotton shirts by nike for men.,nike,shirts,blue,cotton,men,30.00,900
M004,prada red shirts,Premium red cotton shirts by prada for women.,prada,shirts,red,cotton,women,60.00,20
M005,gucci purple gloves,Stylish purple leather gloves by gucci for kids.,gucci,gloves,purple,leather,kids,25.00,5
M006,nike white shoes,Durable white cotton shoes by nike for men.,nike,shoes,white,cotton,men,45.00,300
M007,prada blue shoes,Modern blue leather shoes by prada for women.,prada,shoes,blue,leather,women,150.00,70
M008,gucci red belts,Classic red leather belts by gucci for men.,gucci,belts,red,leather,men,35.00,15
"""

MINI_CONFIG = """\
schema:
  kinds: [SORTAL, BRAND, COLOR, MATERIAL, GENDER, PRICE]
  vocab_seeds:
    SORTAL: [shoes, shirts, gloves, belts]
  similarity:
    COLOR:
      - [purple, dark red, 0.2]
      - [purple, red, 0.4]
      - [dark red, red, 0.15]
strategies:
  - {tag: BRAND, type: config, source: Manufacturer}
  - {tag: COLOR, type: config, source: Color}
  - {tag: MATERIAL, type: config, source: Material}
  - {tag: GENDER, type: config, source: Gender}
  - tag: SORTAL
    type: heuristic
    rule: first_noun_overlap
    params: {description_column: Description, category_column: Category}
  - {tag: PRICE, type: config, source: Price}
grammar:
  text: |
    [SORTAL]
    [COLOR] [SORTAL]
    [BRAND] [SORTAL]
    [BRAND] [COLOR] [SORTAL]
    [SORTAL] under [PRICE]
    [COLOR] [SORTAL] for [GENDER]
synonyms:
  sneakers: [shoes]
training: {seed: 13, epochs: 8, calibration_split: 0.1}
generation: {n: 400, seed: 3, policy: over_generate}
router: {threshold: 0.5, k: 10, fields: [Name, Description]}
fallback:
  priority: [COLOR, MATERIAL, GENDER, BRAND]
ranking:
  weights: {popularity: 1.0}
signals:
  popularity_column: Popularity
suggestions: {limit: 200}
"""


@pytest.fixture(scope="session")
def mini_config():
    return parse_engine_config(MINI_CONFIG)


@pytest.fixture(scope="session")
def mini_catalog():
    return parse_catalog(MINI_CATALOG)


@pytest.fixture(scope="session")
def mini_kb(mini_catalog, mini_config):
    return extract_tags(mini_catalog, mini_config.schema, mini_config.strategies)


@pytest.fixture(scope="session")
def mini_productions(mini_config):
    return parse_production_file(mini_config.grammar_text)


@pytest.fixture(scope="session")
def mini_state(mini_catalog, mini_config):
    """Fully trained engine on the 8-product catalog (fast)."""
    return build_engine(mini_catalog, mini_config)


@pytest.fixture(scope="session")
def no_purple_shoes_kb(mini_config):
    """Mini catalog variant: purple removed from shoes, dark-red shoes exist."""
    text = MINI_CATALOG.replace(
        "M001,prada purple shoes,Elegant purple leather shoes by prada for men.,prada,shoes,purple",
        "M001,prada black shoes,Elegant black leather shoes by prada for men.,prada,shoes,black",
    )
    return extract_tags(parse_catalog(text), mini_config.schema, mini_config.strategies)


@pytest.fixture(scope="session")
def fixture_config():
    return load_engine_config(FIXTURES / "shop_fixture.yaml")


@pytest.fixture(scope="session")
def fixture_catalog_path():
    return FIXTURES / "fixture_1k.csv"


@pytest.fixture(scope="session")
def fixture_catalog(fixture_catalog_path):
    return load_catalog(fixture_catalog_path)


@pytest.fixture(scope="session")
def fixture_kb(fixture_catalog, fixture_config):
    return extract_tags(fixture_catalog, fixture_config.schema, fixture_config.strategies)


@pytest.fixture(scope="session")
def small_state(fixture_catalog, fixture_config):
    """Engine on the 1k fixture with a reduced corpus: big enough to route
    realistically, small enough for the non-acceptance test modules."""
    config = dataclasses.replace(
        fixture_config,
        generation=dataclasses.replace(fixture_config.generation, n=1500),
        training=dataclasses.replace(fixture_config.training, epochs=3),
        suggestions=dataclasses.replace(fixture_config.suggestions, limit=300),
    )
    return build_engine(fixture_catalog, config)
