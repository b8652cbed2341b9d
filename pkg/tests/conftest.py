"""Shared fixtures: corpora, synthetic databases, and the sqlite reference engine."""

from __future__ import annotations

import random
import sqlite3
from fractions import Fraction
from importlib import resources

import pytest

from corpusqa.corpus import Corpus, load_corpus
from corpusqa.database import (
    ARTICLE_AUTHOR,
    ARTICLES,
    CITING_CITED,
    INT_COLUMNS,
    ArticleAuthorRow,
    ArticlesRow,
    CitingCitedRow,
    MetadataDatabase,
)
from corpusqa.sql_engine import ResultTable, execute_query, parse_sql, render_value, serialize_answer

_WORDS = (
    "adaptive bounds causal drift entropy filters gradient hybrid inference "
    "joint kernel lattice manifold network operator posterior quantile "
    "random sparse tensor uniform variational wavelet shift scaling"
).split()

_NAMES = (
    "A. Vaswani", "N. Shazeer", "P. O'Neil", "J. Muñoz", "L. Chen", "R. Baxter",
    "S. Tanaka", "K. Larsen", "M. Rossi", "D. Fontana", "T. Novak", "E. Petrov",
    "H. Ibarra", "W. Zhang", "Y. Sato", "G. Kovacs",
)


def make_random_db(rng: random.Random, n_articles: int | None = None) -> MetadataDatabase:
    """Synthetic three-table database with 3-50 articles."""
    n = n_articles if n_articles is not None else rng.randint(3, 50)
    articles = []
    authors = []
    ids = [f"p{k:03d}" for k in range(n)]
    for aid in ids:
        n_words = rng.randint(2, 12)
        title = " ".join(rng.choice(_WORDS) for _ in range(n_words)).capitalize()
        n_auth = rng.randint(1, 6)
        names = rng.sample(_NAMES, n_auth)
        n_refs = rng.randint(0, 80)
        articles.append(ArticlesRow(aid, title, n_words, n_auth, n_refs))
        for pos, name in enumerate(names):
            authors.append(ArticleAuthorRow(f"ra-{aid}-{pos}", aid, name, pos))
    edges = []
    seen = set()
    for citing in ids:
        for cited in ids:
            if citing != cited and rng.random() < 0.12 and (citing, cited) not in seen:
                seen.add((citing, cited))
                edges.append(CitingCitedRow(f"re-{citing}-{cited}", citing, cited))
    return MetadataDatabase(f"synth-{n}", articles, authors, edges)


def sqlite_from_db(db: MetadataDatabase) -> sqlite3.Connection:
    """Load the same tables into an in-memory sqlite database."""
    conn = sqlite3.connect(":memory:")
    for table in (ARTICLES, ARTICLE_AUTHOR, CITING_CITED):
        cols = db.columns(table)
        int_cols = set(INT_COLUMNS[table])
        decls = ", ".join(
            f'"{c}" INTEGER' if c in int_cols else f'"{c}" TEXT' for c in cols
        )
        conn.execute(f"CREATE TABLE {table} ({decls})")
        marks = ",".join("?" * len(cols))
        conn.executemany(f"INSERT INTO {table} VALUES ({marks})", db.rows(table))
    return conn


def _canon_key(row):
    key = []
    for v in row:
        if v is None:
            key.append((0, ""))
        elif isinstance(v, (int, float, Fraction)):
            key.append((1, float(v)))
        else:
            key.append((2, str(v)))
    return tuple(key)


def oracle_compare(db: MetadataDatabase, conn: sqlite3.Connection, sql: str):
    """Execute on both engines; returns (matches, ours, reference).

    Row order is part of the comparison only when the query carries an ORDER
    BY whose visible keys are duplicate-free; otherwise both sides are put in
    a canonical order first and compared as ordered serializations.
    """
    result = execute_query(db, sql)
    ref_rows = conn.execute(sql).fetchall()
    ordered = bool(parse_sql(sql).order_by) and not result.tie_affected
    mine_rows = list(result.rows)
    ref_rows = [tuple(r) for r in ref_rows]
    if not ordered:
        mine_rows.sort(key=_canon_key)
        ref_rows.sort(key=_canon_key)
    ours = serialize_answer(mine_rows)
    reference = serialize_answer(ref_rows)
    return ours == reference, ours, reference


@pytest.fixture(scope="session")
def mini_corpus() -> Corpus:
    path = resources.files("corpusqa.data").joinpath("mini_corpus.jsonl")
    corpus, report = load_corpus(str(path))
    assert report.loaded == 12 and not report.record_errors
    return corpus


@pytest.fixture()
def rng() -> random.Random:
    return random.Random(1234)


# Hand-authored six-article database: distinct author counts so ordered
# results are tie-free, one two-author article with 16 references, and a
# citation graph with exactly two cited-but-never-citing members.
@pytest.fixture(scope="session")
def pinned_db() -> MetadataDatabase:
    rows = [
        ("t1", "Signal recovery under structured noise models for sparse channels", 9, 1, 12),
        ("t2", "A comparative study of attention mechanisms across sequence model "
               "families trained on mixed domain corpora at scale", 17, 2, 16),
        ("t3", "Convex methods for matrix completion", 5, 3, 40),
        ("t4", "Causal effects in observational panel studies", 6, 5, 22),
        ("t5", "Stability of stochastic approximation schemes with correlated increments", 9, 8, 31),
        ("t6", "On the geometry of loss landscapes in overparameterized networks "
               "with residual connections", 12, 10, 45),
    ]
    articles = [ArticlesRow(*r) for r in rows]
    pool = list(_NAMES)
    authors = []
    for aid, _, _, count, _ in rows:
        for pos in range(count):
            authors.append(ArticleAuthorRow(f"ra-{aid}-{pos}", aid, pool[pos % len(pool)], pos))
    edges = [
        CitingCitedRow("re-1", "t1", "t2"),
        CitingCitedRow("re-2", "t1", "t3"),
        CitingCitedRow("re-3", "t4", "t2"),
    ]
    return MetadataDatabase("pinned", articles, authors, edges)
