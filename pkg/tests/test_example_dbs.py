"""The shipped reference databases: shape, payload validity, index coverage."""

import collections
from pathlib import Path

import pytest

from roomsmith.o2o import (
    DeterministicHashEmbedder,
    O2OConfig,
    build_offline_index,
    load_example_db,
    validate_example_db,
)
from roomsmith.prompts import SchemaId, load_schema, _validator

DATA = Path(__file__).resolve().parent.parent / "src" / "roomsmith" / "data"

KINDS = [k for k in SchemaId if k is not SchemaId.CATEGORY_ID]


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.snake)
def test_database_exists_and_validates(kind):
    path = DATA / f"{kind.snake}.json"
    assert path.exists(), f"missing shipped database {path.name}"
    assert validate_example_db(path) == []


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.snake)
def test_database_size_and_category_balance(kind):
    taxonomy, recs = load_example_db(DATA / f"{kind.snake}.json")
    assert 50 <= len(recs) <= 100
    per = collections.Counter(r.category for r in recs)
    assert set(per) == set(taxonomy)
    assert min(per.values()) >= 8  # k=8 must yield full support sets


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.snake)
def test_every_payload_matches_the_response_schema(kind):
    _, recs = load_example_db(DATA / f"{kind.snake}.json")
    validator = _validator(kind)
    for r in recs:
        errors = list(validator.iter_errors(r.y))
        assert not errors, f"{r.id}: {errors[0].message}"


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.snake)
def test_index_gives_eight_record_support_sets(kind):
    taxonomy, recs = load_example_db(DATA / f"{kind.snake}.json")
    cfg = O2OConfig(k=8, taxonomy=tuple(taxonomy))
    index = build_offline_index(recs, cfg, DeterministicHashEmbedder())
    assert set(index) == set(taxonomy)
    for category, support in index.items():
        assert len(support) == 8, f"{category}: {len(support)}"


def test_task_decomposition_taxonomy_is_the_eight_digits():
    taxonomy, _ = load_example_db(DATA / "task_decomposition.json")
    assert taxonomy == [str(i) for i in range(8)]
