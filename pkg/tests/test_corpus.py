import json

import pytest

from corpusqa.corpus import SUBJECTS, load_corpus, save_corpus
from corpusqa.errors import DuplicateArticleError
from corpusqa.tokenizer import tokenize_count, DEFAULT_TOKENIZER


def _record(aid, **overrides):
    rec = {
        "article_id": aid,
        "title": f"Title of {aid}",
        "authors": ["A. One", "B. Two"],
        "reference_ids": ["x1", "x2"],
        "full_text": f"# {aid}\n\nBody text for {aid}. " * 5,
        "subject": "CS",
    }
    rec.update(overrides)
    return rec


def _write_jsonl(path, records):
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def test_loads_valid_records(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1"), _record("a2"), _record("a3")])
    corpus, report = load_corpus(path)
    assert len(corpus) == 3
    assert report.loaded == 3
    assert not report.dropped_missing_fulltext and not report.record_errors


def test_drops_records_without_full_text(tmp_path):
    path = tmp_path / "corpus.jsonl"
    records = [_record("a1"), _record("a2"), _record("a3"),
               _record("a4", full_text=None)]
    _write_jsonl(path, records)
    corpus, report = load_corpus(path)
    assert len(corpus) == 3
    assert report.dropped_missing_fulltext == ["a4"]


def test_duplicate_article_id_is_fatal(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1"), _record("a1")])
    with pytest.raises(DuplicateArticleError):
        load_corpus(path)


def test_malformed_record_reported_with_field(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1"), _record("a2", authors=[])])
    corpus, report = load_corpus(path)
    assert len(corpus) == 1
    assert len(report.record_errors) == 1
    assert report.record_errors[0].field == "authors"


def test_unknown_subject_rejected(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1", subject="Alchemy")])
    corpus, report = load_corpus(path)
    assert len(corpus) == 0
    assert report.record_errors[0].field == "subject"
    assert "CS" in str(SUBJECTS)


def test_reference_sanitization(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1", reference_ids=["a1", "x1", "x1", "x2"])])
    corpus, _ = load_corpus(path)
    art = corpus.get("a1")
    assert art.reference_ids == ("x1", "x2")


def test_full_text_by_relative_path(tmp_path):
    body = tmp_path / "texts"
    body.mkdir()
    (body / "a1.md").write_text("# External body\n\ncontent here", encoding="utf-8")
    rec = _record("a1")
    del rec["full_text"]
    rec["full_text_path"] = "texts/a1.md"
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [rec])
    corpus, _ = load_corpus(path)
    assert corpus.get("a1").full_text.startswith("# External body")


def test_token_count_matches_tokenizer(tmp_path):
    path = tmp_path / "corpus.jsonl"
    _write_jsonl(path, [_record("a1")])
    corpus, _ = load_corpus(path)
    art = corpus.get("a1")
    assert art.token_count == tokenize_count(art.full_text, DEFAULT_TOKENIZER)


def test_round_trip_save_load(tmp_path, mini_corpus):
    target = tmp_path / "roundtrip.jsonl"
    save_corpus(mini_corpus, target)
    reloaded, report = load_corpus(target)
    assert report.loaded == len(mini_corpus)
    for art in mini_corpus:
        other = reloaded.get(art.article_id)
        assert other == art


def test_directory_of_jsonl_files(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    _write_jsonl(d / "part1.jsonl", [_record("a1")])
    _write_jsonl(d / "part2.jsonl", [_record("a2")])
    corpus, report = load_corpus(d)
    assert sorted(corpus.ids()) == ["a1", "a2"]
