"""Per-collection metadata database: articles, article_author, citing_cited.

The three tables are the ground-truth substrate for query generation.
``reference_count`` counts an article's full bibliography, while the
``citing_cited`` table is restricted to ordered pairs inside the collection.
Builds are deterministic: row order follows collection order and relation ids
are content hashes, so rebuilding the same collection twice dumps identical
CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from .assembly import Collection
from .corpus import Corpus
from .errors import DanglingReferenceError, DatabaseBuildError

ARTICLES = "articles"
ARTICLE_AUTHOR = "article_author"
CITING_CITED = "citing_cited"

SCHEMA: Dict[str, Tuple[str, ...]] = {
    ARTICLES: ("article_id", "article_title", "title_word_count", "author_count", "reference_count"),
    ARTICLE_AUTHOR: ("relation_id", "article_id", "author_name", "author_position"),
    CITING_CITED: ("relation_id", "article_id_citing", "article_id_cited"),
}

# Integer-valued columns per table; everything else is a string.
INT_COLUMNS: Dict[str, Tuple[str, ...]] = {
    ARTICLES: ("title_word_count", "author_count", "reference_count"),
    ARTICLE_AUTHOR: ("author_position",),
    CITING_CITED: (),
}

PRIMARY_KEY = {ARTICLES: "article_id", ARTICLE_AUTHOR: "relation_id", CITING_CITED: "relation_id"}

Row = Tuple[Union[int, str], ...]


def title_word_count(title: str) -> int:
    """Number of space-separated words, ignoring leading/trailing whitespace."""
    return len(title.split())


def _relation_id(*parts: str) -> str:
    return "r" + hashlib.sha1("\x1f".join(parts).encode("utf-8")).hexdigest()[:15]


@dataclass(frozen=True)
class ArticlesRow:
    article_id: str
    article_title: str
    title_word_count: int
    author_count: int
    reference_count: int


@dataclass(frozen=True)
class ArticleAuthorRow:
    relation_id: str
    article_id: str
    author_name: str
    author_position: int


@dataclass(frozen=True)
class CitingCitedRow:
    relation_id: str
    article_id_citing: str
    article_id_cited: str


class MetadataDatabase:
    """Read-only three-table database queried by the SQL subset engine."""

    def __init__(
        self,
        collection_id: str,
        articles: Sequence[ArticlesRow],
        article_author: Sequence[ArticleAuthorRow],
        citing_cited: Sequence[CitingCitedRow],
    ):
        self.collection_id = collection_id
        self._tables: Dict[str, List[Row]] = {
            ARTICLES: [
                (r.article_id, r.article_title, r.title_word_count, r.author_count, r.reference_count)
                for r in articles
            ],
            ARTICLE_AUTHOR: [
                (r.relation_id, r.article_id, r.author_name, r.author_position)
                for r in article_author
            ],
            CITING_CITED: [
                (r.relation_id, r.article_id_citing, r.article_id_cited) for r in citing_cited
            ],
        }

    def columns(self, table: str) -> Tuple[str, ...]:
        return SCHEMA[table]

    def rows(self, table: str) -> List[Row]:
        return self._tables[table]

    def has_table(self, table: str) -> bool:
        return table in self._tables

    def primary_key(self, table: str) -> str:
        return PRIMARY_KEY[table]

    def table_csv(self, table: str) -> str:
        """RFC-4180-quoted CSV dump with a header row."""
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(SCHEMA[table])
        writer.writerows(self._tables[table])
        return buf.getvalue()

    def dump_csvs(self, directory) -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for table in (ARTICLES, ARTICLE_AUTHOR, CITING_CITED):
            p = directory / f"{table}.csv"
            p.write_text(self.table_csv(table), encoding="utf-8")
            paths.append(p)
        return paths

    @classmethod
    def from_csv_dir(cls, collection_id: str, directory) -> "MetadataDatabase":
        directory = Path(directory)

        def read(table, row_cls, int_cols):
            out = []
            with (directory / f"{table}.csv").open(encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh)
                for rec in reader:
                    for col in int_cols:
                        rec[col] = int(rec[col])
                    out.append(row_cls(**rec))
            return out

        return cls(
            collection_id,
            read(ARTICLES, ArticlesRow, INT_COLUMNS[ARTICLES]),
            read(ARTICLE_AUTHOR, ArticleAuthorRow, INT_COLUMNS[ARTICLE_AUTHOR]),
            read(CITING_CITED, CitingCitedRow, INT_COLUMNS[CITING_CITED]),
        )


def derive_citation_edges(collection: Collection, corpus: Corpus) -> List[CitingCitedRow]:
    """Ordered (citing, cited) pairs restricted to collection members."""
    members = list(collection.article_ids)
    member_set = set(members)
    rows = []
    for citing in members:
        refs = set(corpus.get(citing).reference_ids)
        for cited in members:
            if cited != citing and cited in refs:
                rows.append(CitingCitedRow(_relation_id(citing, cited), citing, cited))
    return rows


def build_database(collection: Collection, corpus: Corpus) -> MetadataDatabase:
    """Populate all three tables for a collection."""
    missing = [a for a in collection.article_ids if a not in corpus]
    if missing:
        raise DanglingReferenceError(
            f"collection {collection.collection_id} references missing articles: {missing}"
        )
    articles = []
    authors = []
    for aid in collection.article_ids:
        art = corpus.get(aid)
        if not art.authors:
            raise DatabaseBuildError(f"article {aid!r} has an empty author list")
        articles.append(
            ArticlesRow(
                article_id=aid,
                article_title=art.title,
                title_word_count=title_word_count(art.title),
                author_count=len(art.authors),
                reference_count=len(art.reference_ids),
            )
        )
        for pos, name in enumerate(art.authors):
            authors.append(ArticleAuthorRow(_relation_id(aid, str(pos)), aid, name, pos))
    edges = derive_citation_edges(collection, corpus)
    return MetadataDatabase(collection.collection_id, articles, authors, edges)
