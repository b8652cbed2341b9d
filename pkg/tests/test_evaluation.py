import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_random_db
from corpusqa.errors import ContextLengthError
from corpusqa.evaluation import (
    DB_TABLES,
    EvalConfig,
    EvalRecord,
    answer_tokens,
    evaluate_instances,
    exact_match,
    f1_score,
    format_violation_flag,
    normalize_answer,
    null_answer_flag,
    partial_answer_flag,
    query_model,
    read_records,
    render_prompt_tables,
    score_record,
    summarize,
    write_records,
)
from corpusqa.mocks import GoldEchoModel, ScriptedModel, UuidModel
from corpusqa.templates import BenchmarkInstance


# ---------------------------------------------------------------------------
# Normalization and exact match


def test_em_identity():
    assert exact_match("10", "10") == 1


def test_em_null_casefold():
    assert exact_match("null", "NULL") == 1


def test_em_order_sensitive():
    assert exact_match("A. Vaswani, N. Shazeer", "N. Shazeer, A. Vaswani") == 0


def test_em_numeric_by_value():
    assert exact_match("10.0", "10") == 1
    assert exact_match("2.50", "2.5") == 1


def test_em_trailing_period_and_whitespace():
    assert exact_match(" 42. ", "42") == 1
    assert exact_match("a   b", "a b") == 1
    assert exact_match("9,17, 5", "9, 17, 5") == 1


def test_normalize_strips_one_period_only():
    assert normalize_answer("etc..") == "etc."


# ---------------------------------------------------------------------------
# F1


def test_f1_identity():
    assert f1_score("alpha beta", "alpha beta") == 1.0


def test_f1_partial_hand_computed():
    # P = 2/4, R = 2/2 -> F1 = 2/3.
    value = f1_score("N. Shazeer, A. Vaswani", "A. Vaswani")
    assert abs(value - 2 / 3) < 1e-12


def test_f1_disjoint_zero():
    assert f1_score("alpha", "beta") == 0.0


def test_f1_order_insensitive():
    assert f1_score("A. Vaswani, N. Shazeer", "N. Shazeer, A. Vaswani") == 1.0


def test_f1_empty_rules():
    assert f1_score("", "") == 1.0
    assert f1_score("", "x") == 0.0
    assert f1_score("x", "") == 0.0


_printable = st.text(alphabet=string.printable, max_size=40)


@settings(max_examples=300, deadline=None)
@given(_printable)
def test_identity_scores(x):
    assert exact_match(x, x) == 1
    assert f1_score(x, x) == 1.0


@settings(max_examples=300, deadline=None)
@given(_printable, _printable)
def test_em_implies_f1(p, g):
    if exact_match(p, g) == 1:
        assert f1_score(p, g) == 1.0


@settings(max_examples=200, deadline=None)
@given(_printable, _printable)
def test_scores_pure(p, g):
    assert exact_match(p, g) == exact_match(p, g)
    assert f1_score(p, g) == f1_score(p, g)
    assert 0.0 <= f1_score(p, g) <= 1.0


# ---------------------------------------------------------------------------
# Failure flags


def test_null_flag():
    assert null_answer_flag("NULL", "16")
    assert not null_answer_flag("NULL", "NULL")
    assert not null_answer_flag("16", "16")


def test_partial_answer_flag():
    assert partial_answer_flag("9, 17", "9, 17, 5")
    assert not partial_answer_flag("9, 17, 5", "9, 17, 5")
    assert not partial_answer_flag("9, 99", "9, 17, 5")
    assert not partial_answer_flag("", "9, 17, 5")
    assert not partial_answer_flag("9", "9")  # gold not a list


def test_format_violation_flag():
    count_sql = "SELECT COUNT(*) FROM articles"
    names_sql = "SELECT author_name FROM article_author"
    assert format_violation_flag("P. Smith, Q. Jones", count_sql)
    assert not format_violation_flag("3", count_sql)
    assert format_violation_flag("42", names_sql)
    assert not format_violation_flag("P. Smith", names_sql)
    assert not format_violation_flag("NULL", count_sql)  # counted as null, not format


# ---------------------------------------------------------------------------
# Sampling and records


def test_query_model_mock_sampling():
    backend = ScriptedModel(["10"])
    assert query_model(backend, "any prompt", 3) == ["10", "10", "10"]
    assert query_model(ScriptedModel(["a"]), "p", 1) == ["a"]
    with pytest.raises(ValueError):
        query_model(backend, "p", 0)


def _instances_for(db):
    return [
        BenchmarkInstance(
            instance_id=f"i{k}", collection_id=db.collection_id, level="8K",
            skill="Aggregating", topic="AuthorCount",
            sql="SELECT MAX(author_count) FROM articles",
            question=f"What is the maximum author count? (variant {k})",
            gold_answer="5", split="test",
        )
        for k in range(3)
    ]


def test_evaluate_gold_echo_scores_one(rng):
    db = make_random_db(rng, n_articles=6)
    instances = _instances_for(db)
    backend = GoldEchoModel(instances)
    config = EvalConfig(context_mode=DB_TABLES, samples_per_question=3)
    records = evaluate_instances(instances, backend, "gold-echo", config, dbs={db.collection_id: db})
    assert all(r.mean_em == 1.0 and r.mean_f1 == 1.0 for r in records)
    assert all(len(r.samples) == 3 for r in records)


def test_evaluate_uuid_scores_zero(rng):
    db = make_random_db(rng, n_articles=6)
    instances = _instances_for(db)
    config = EvalConfig(context_mode=DB_TABLES, samples_per_question=3)
    records = evaluate_instances(instances, UuidModel(random.Random(1)), "uuid", config,
                                 dbs={db.collection_id: db})
    assert all(r.mean_em == 0.0 for r in records)


def test_over_length_prompt_flagged_unanswerable(rng):
    db = make_random_db(rng, n_articles=6)
    instances = _instances_for(db)

    class TinyWindowBackend(ScriptedModel):
        context_window = 10  # tokens; any rendered prompt exceeds this

    config = EvalConfig(context_mode=DB_TABLES, samples_per_question=2)
    records = evaluate_instances(instances, TinyWindowBackend(["10"]), "tiny", config,
                                 dbs={db.collection_id: db})
    assert all(r.unanswerable for r in records)
    assert all(not r.samples and r.mean_em is None for r in records)


def test_endpoint_rejection_flagged_unanswerable(rng):
    db = make_random_db(rng, n_articles=6)
    instances = _instances_for(db)

    class Rejecting:
        def complete(self, prompt, *, n=1, temperature=None):
            raise ContextLengthError("too long")

    config = EvalConfig(context_mode=DB_TABLES, samples_per_question=2)
    records = evaluate_instances(instances, Rejecting(), "reject", config,
                                 dbs={db.collection_id: db})
    assert all(r.unanswerable for r in records)


def test_sample_count_boundary():
    with pytest.raises(ValueError):
        EvalConfig(samples_per_question=0)


def test_records_round_trip(tmp_path):
    rec = EvalRecord(instance_id="i1", model="m", context_mode=DB_TABLES,
                     samples=["a", "b"], em_per_sample=[0, 1], f1_per_sample=[0.0, 1.0],
                     mean_em=0.5, mean_f1=0.5)
    target = tmp_path / "records.jsonl"
    write_records([rec], target)
    assert read_records(target) == [rec]


def test_score_record_flags(rng):
    inst = BenchmarkInstance(
        instance_id="i1", collection_id="c", level="8K", skill="Filtering",
        topic="ReferenceCount", sql="SELECT reference_count FROM articles WHERE author_count = 2",
        question="q", gold_answer="16, 21",
    )
    rec = EvalRecord(instance_id="i1", model="m", context_mode=DB_TABLES,
                     samples=["NULL", "16", "P. Smith"])
    score_record(rec, inst)
    assert rec.null_answer
    assert rec.partial_answer  # "16" is a proper sub-bag of "16, 21"
    assert rec.format_violation  # "P. Smith" against a numeric column


def test_summary_grouping(rng):
    db = make_random_db(rng, n_articles=5)
    instances = _instances_for(db)
    config = EvalConfig(context_mode=DB_TABLES, samples_per_question=1)
    records = evaluate_instances(instances, GoldEchoModel(instances), "m1", config,
                                 dbs={db.collection_id: db})
    rows = summarize(records, instances)
    assert rows == [{
        "model": "m1", "level": "8K", "context_mode": DB_TABLES,
        "instances": 3, "unanswerable": 0, "mean_em": 1.0, "mean_f1": 1.0,
    }]
