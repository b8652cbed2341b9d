"""Article corpus loading, validation, and JSON-lines interchange.

A corpus is a set of full-text scientific articles with ordered author lists
and reference lists. The interchange format is one JSON object per line with
the fields of :class:`Article`; ``full_text`` may be inlined or referenced by
a relative ``full_text_path``. Articles without full text are dropped and
counted in the load report; malformed records are reported per record;
duplicate article ids are fatal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

from .errors import CorpusFormatError, DuplicateArticleError
from .tokenizer import DEFAULT_TOKENIZER, TokenizerSpec, tokenize_count

SUBJECTS = ("CS", "Economics", "EE", "Math", "Physics", "Biology", "Finance", "Statistics")


@dataclass(frozen=True)
class Article:
    """One full-text article. ``authors`` order is the byline order."""

    article_id: str
    title: str
    authors: Tuple[str, ...]
    reference_ids: Tuple[str, ...]
    full_text: str
    subject: str
    token_count: int


class Corpus:
    """Immutable id-keyed set of articles, preserving load order."""

    def __init__(self, articles: Iterable[Article]):
        self._by_id = {}
        for art in articles:
            if art.article_id in self._by_id:
                raise DuplicateArticleError(f"duplicate article_id {art.article_id!r}")
            self._by_id[art.article_id] = art

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Article]:
        return iter(self._by_id.values())

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._by_id

    def get(self, article_id: str) -> Article:
        return self._by_id[article_id]

    def ids(self) -> List[str]:
        return list(self._by_id)

    def total_tokens(self) -> int:
        return sum(a.token_count for a in self._by_id.values())


@dataclass
class RecordError:
    record_ref: str
    field: str
    message: str


@dataclass
class LoadReport:
    loaded: int = 0
    dropped_missing_fulltext: List[str] = field(default_factory=list)
    record_errors: List[RecordError] = field(default_factory=list)


def _parse_record(raw: dict, ref: str, base_dir: Path, tokenizer: TokenizerSpec) -> Optional[Article]:
    """Validate one record. Returns None when full text is absent."""

    def fail(fieldname, msg):
        raise CorpusFormatError(ref, fieldname, msg)

    article_id = raw.get("article_id")
    if not isinstance(article_id, str) or not article_id:
        fail("article_id", "missing or not a non-empty string")
    title = raw.get("title")
    if not isinstance(title, str):
        fail("title", "missing or not a string")
    authors = raw.get("authors")
    if not isinstance(authors, list) or not authors or not all(isinstance(a, str) and a for a in authors):
        fail("authors", "must be a non-empty list of non-empty strings")
    subject = raw.get("subject")
    if subject not in SUBJECTS:
        fail("subject", f"must be one of {SUBJECTS}")
    refs_raw = raw.get("reference_ids", [])
    if not isinstance(refs_raw, list) or not all(isinstance(r, str) for r in refs_raw):
        fail("reference_ids", "must be a list of strings")

    full_text = raw.get("full_text")
    if full_text is None and raw.get("full_text_path"):
        path = base_dir / raw["full_text_path"]
        if path.is_file():
            full_text = path.read_text(encoding="utf-8")
    if not full_text:
        return None

    # References keep first-occurrence order; self-references and duplicates
    # are dropped so the reference_count invariant holds downstream.
    refs, seen = [], set()
    for r in refs_raw:
        if r != article_id and r not in seen:
            seen.add(r)
            refs.append(r)

    return Article(
        article_id=article_id,
        title=title,
        authors=tuple(authors),
        reference_ids=tuple(refs),
        full_text=full_text,
        subject=subject,
        token_count=tokenize_count(full_text, tokenizer),
    )


def _record_files(path: Path) -> List[Path]:
    if path.is_file():
        return [path]
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise CorpusFormatError(str(path), "-", "directory contains no .jsonl files")
        return files
    raise CorpusFormatError(str(path), "-", "path does not exist")


def load_corpus(path, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER):
    """Load a corpus from a .jsonl file or a directory of .jsonl files.

    Returns ``(corpus, report)``. Records lacking full text are dropped and
    listed in the report; malformed records are skipped and reported with
    their record reference and field; a duplicate ``article_id`` raises
    :class:`DuplicateArticleError`.
    """
    path = Path(path)
    report = LoadReport()
    articles: List[Article] = []
    seen_ids = set()
    for file in _record_files(path):
        base_dir = file.parent
        with file.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                ref = f"{file.name}:{lineno}"
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    report.record_errors.append(RecordError(ref, "-", f"invalid JSON: {exc}"))
                    continue
                if not isinstance(raw, dict):
                    report.record_errors.append(RecordError(ref, "-", "record is not an object"))
                    continue
                try:
                    art = _parse_record(raw, ref, base_dir, tokenizer)
                except CorpusFormatError as exc:
                    report.record_errors.append(RecordError(ref, exc.field, str(exc)))
                    continue
                if art is None:
                    report.dropped_missing_fulltext.append(raw.get("article_id", ref))
                    continue
                if art.article_id in seen_ids:
                    raise DuplicateArticleError(f"duplicate article_id {art.article_id!r} at {ref}")
                seen_ids.add(art.article_id)
                articles.append(art)
    report.loaded = len(articles)
    return Corpus(articles), report


def save_corpus(corpus: Corpus, path) -> None:
    """Write a corpus to one JSON-lines file with full text inlined."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for art in corpus:
            fh.write(json.dumps({
                "article_id": art.article_id,
                "title": art.title,
                "authors": list(art.authors),
                "reference_ids": list(art.reference_ids),
                "full_text": art.full_text,
                "subject": art.subject,
                "token_count": art.token_count,
            }, ensure_ascii=False) + "\n")
