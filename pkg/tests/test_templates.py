import random
from collections import Counter

import pytest

from conftest import make_random_db
from corpusqa.errors import ConfigurationError, InstantiationRejected
from corpusqa.sql_engine import execute_query, parse_sql, serialize_answer
from corpusqa.templates import (
    BenchmarkInstance,
    QueryTemplate,
    generate_candidates,
    instantiate,
    load_builtin_library,
    load_library,
    make_template,
    read_instances,
    save_library,
    select_templates,
    write_instances,
)

EXPECTED_COUNTS = {
    "Aggregating": 20,
    "Sorting": 27,
    "Filtering": 107,
    "Filtering+Aggregating": 107,
    "Filtering+Sorting": 106,
    "RelationalFiltering": 20,
}


@pytest.fixture(scope="module")
def library():
    return load_builtin_library()


def test_library_skill_partition(library):
    assert Counter(t.skill for t in library) == EXPECTED_COUNTS
    assert len(library) == 387


def test_library_parses_and_stays_in_subset(library):
    for template in library:
        probe = template.sql_text
        for name in template.specs():
            probe = probe.replace("{" + name + "}", "0")
        parse_sql(probe)  # raises on anything outside the supported subset


def test_library_canonical_examples_present(library):
    texts = {t.sql_text for t in library}
    assert "SELECT MAX(author_count) FROM articles" in texts
    assert "SELECT title_word_count FROM articles ORDER BY author_count ASC" in texts
    assert ("SELECT author_name FROM article_author "
            "WHERE author_position = {author-position}") in texts
    assert ("SELECT SUM(title_word_count) FROM articles "
            "WHERE reference_count = {reference-count}") in texts
    assert any(
        "% 2 = {parity} ORDER BY" in t.sql_text and t.skill == "Filtering+Sorting"
        for t in library
    )
    assert (
        "SELECT COUNT(*) FROM articles WHERE article_id NOT IN "
        "(SELECT article_id_citing FROM citing_cited) AND article_id IN "
        "(SELECT article_id_cited FROM citing_cited)"
    ) in texts


def test_library_round_trips_through_json(library, tmp_path):
    target = tmp_path / "lib.json"
    save_library(library, target)
    reloaded = load_library(target)
    assert reloaded == library


def test_make_template_validates_placeholders():
    with pytest.raises(ConfigurationError):
        make_template("x1", "Filtering", "AuthorCount",
                      "SELECT author_count FROM articles WHERE author_count = {missing}")


def test_select_templates_distinct_and_deterministic(library):
    a = select_templates(library, random.Random(5), n=10)
    b = select_templates(library, random.Random(5), n=10)
    assert [t.template_id for t in a] == [t.template_id for t in b]
    assert len({t.template_id for t in a}) == 10


def test_select_templates_whole_library(library):
    out = select_templates(library, random.Random(1), n=len(library))
    assert sorted(t.template_id for t in out) == sorted(t.template_id for t in library)


def test_select_templates_rejects_oversample(library):
    with pytest.raises(ConfigurationError):
        select_templates(library, random.Random(1), n=len(library) + 1)


def test_select_templates_stratified_covers_skills(library):
    out = select_templates(library, random.Random(3), n=12, stratified=True)
    assert len({t.skill for t in out}) == 6


def test_instantiate_binds_from_present_values(rng):
    db = make_random_db(rng, n_articles=6)
    template = make_template(
        "x2", "Filtering+Aggregating", "ReferenceCount",
        "SELECT SUM(title_word_count) FROM articles WHERE reference_count = {reference-count}",
        {"reference-count": {"kind": "column_value", "table": "articles",
                             "column": "reference_count"}},
    )
    present = {row[4] for row in db.rows("articles")}
    for seed in range(10):
        iq = instantiate(template, db, random.Random(seed))
        bound = int(dict(iq.bindings)["reference-count"])
        assert bound in present


def test_instantiate_identity_for_no_placeholders(pinned_db):
    template = make_template("x3", "Aggregating", "AuthorCount",
                             "SELECT MAX(author_count) FROM articles")
    iq = instantiate(template, pinned_db, random.Random(0))
    assert iq.sql == "SELECT MAX(author_count) FROM articles"
    assert serialize_answer(execute_query(pinned_db, iq.sql)) == "10"


def test_instantiate_rejects_empty_row_returning(pinned_db):
    # Always-empty row query: LIKE token that cannot appear in any title.
    template = make_template(
        "x4", "Filtering", "TitleList",
        "SELECT article_title FROM articles WHERE article_title LIKE '%zzqx{parity}%'",
        {"parity": {"kind": "choice", "values": [7]}},
    )
    with pytest.raises(InstantiationRejected):
        instantiate(template, pinned_db, random.Random(0))


def test_instantiate_keeps_scalar_aggregates_even_if_null(pinned_db):
    template = make_template(
        "x5", "Filtering+Aggregating", "AuthorCount",
        "SELECT SUM(author_count) FROM articles WHERE author_count > {author-count}",
        {"author-count": {"kind": "column_value", "table": "articles",
                          "column": "author_count"}},
    )
    # Binding 10 (the maximum) yields an empty filter and a NULL sum; the
    # instantiation must still be kept.
    for seed in range(30):
        iq = instantiate(template, pinned_db, random.Random(seed))
        if dict(iq.bindings)["author-count"] == "10":
            assert serialize_answer(execute_query(pinned_db, iq.sql)) == "NULL"
            return
    pytest.fail("never drew the maximal binding")


def test_between_bindings_are_ordered(rng):
    db = make_random_db(rng, n_articles=12)
    template = make_template(
        "x6", "Filtering", "TitleList",
        "SELECT article_title FROM articles WHERE reference_count BETWEEN "
        "{reference-count-lo} AND {reference-count-hi}",
        {
            "reference-count-lo": {"kind": "column_value", "table": "articles",
                                   "column": "reference_count"},
            "reference-count-hi": {"kind": "column_value", "table": "articles",
                                   "column": "reference_count"},
        },
    )
    for seed in range(20):
        try:
            iq = instantiate(template, db, random.Random(seed))
        except InstantiationRejected:
            continue
        bound = dict(iq.bindings)
        assert int(bound["reference-count-lo"]) <= int(bound["reference-count-hi"])


def test_author_name_binding_escapes_quotes(rng):
    db = make_random_db(rng, n_articles=30)
    names = {row[2] for row in db.rows("article_author")}
    assert any("'" in n for n in names), "fixture should include a quoted name"
    template = make_template(
        "x7", "Filtering", "AuthorRelation",
        "SELECT author_position FROM article_author WHERE author_name = '{author-name}'",
        {"author-name": {"kind": "column_value", "table": "article_author",
                         "column": "author_name"}},
    )
    hit = False
    for seed in range(60):
        iq = instantiate(template, db, random.Random(seed))
        if "''" in iq.sql:
            hit = True
            execute_query(db, iq.sql)
    assert hit, "never drew the apostrophe name"


def test_generate_candidates_gold_matches_engine(library, rng):
    db = make_random_db(rng, n_articles=10)
    candidates, stats = generate_candidates(db, library, random.Random(4), n=10,
                                            level="8K", subject="CS")
    assert stats.instantiated == len(candidates)
    assert stats.instantiated + stats.rejected == 10
    for cand in candidates:
        assert cand.gold_answer == serialize_answer(execute_query(db, cand.sql))
        assert cand.question == ""
        assert cand.skill in EXPECTED_COUNTS


def test_instances_round_trip(tmp_path):
    rows = [
        BenchmarkInstance(
            instance_id="i1", collection_id="c1", level="64K", skill="Aggregating",
            topic="AuthorCount", sql="SELECT MAX(author_count) FROM articles",
            question="What is the highest number of authors?", gold_answer="10",
            split="test", tie_affected=False, template_id="agg001", subject="CS",
        )
    ]
    target = tmp_path / "instances.jsonl"
    write_instances(rows, target)
    assert read_instances(target) == rows
