"""Construction of the bundled query-template library.

The library holds 387 templates split across the six information-processing
skills as 20 / 27 / 107 / 107 / 106 / 20 (Aggregating, Sorting, Filtering,
Filtering+Aggregating, Filtering+Sorting, Relational Filtering). Families are
expanded from small grids over the schema columns so every command and
operator of the supported SQL subset appears somewhere in the bank. The
result is serialized once into ``data/templates.json`` by
``tools/build_template_bank.py`` and loaded from there at run time.
"""

from __future__ import annotations

from typing import Dict, List

from .templates import QueryTemplate, make_template

NUMERIC_COLS = ("author_count", "reference_count", "title_word_count")
OUT_COLS = ("article_title",) + NUMERIC_COLS

_TOPIC_BY_COL = {
    "author_count": "AuthorCount",
    "reference_count": "ReferenceCount",
    "title_word_count": "TitleWordCount",
    "article_title": "TitleList",
    "author_name": "AuthorList",
}

_PLACEHOLDER_BY_COL = {
    "author_count": "author-count",
    "reference_count": "reference-count",
    "title_word_count": "title-word-count",
}


def _value_spec(column: str) -> Dict[str, object]:
    return {"kind": "column_value", "table": "articles", "column": column}


def _pair_grid():
    """(out, cond) column pairs with out != cond."""
    return [(out, cond) for out in OUT_COLS for cond in NUMERIC_COLS if cond != out]


def _aggregating() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"agg{i:03d}", "Aggregating", topic, sql, specs))

    for col in NUMERIC_COLS:
        for fn in ("MAX", "MIN", "SUM", "AVG"):
            add(_TOPIC_BY_COL[col], f"SELECT {fn}({col}) FROM articles")
        add(_TOPIC_BY_COL[col], f"SELECT COUNT(DISTINCT {col}) FROM articles")
    add("TitleList", "SELECT COUNT(*) FROM articles")
    add("AuthorList", "SELECT COUNT(DISTINCT author_name) FROM article_author")
    add("AuthorRelation", "SELECT COUNT(*) FROM article_author")
    add("AuthorRelation", "SELECT MAX(author_position) FROM article_author")
    add("CitationRelation", "SELECT COUNT(*) FROM citing_cited")
    return out


def _sorting() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"srt{i:03d}", "Sorting", topic, sql, specs))

    for sel, key in _pair_grid():
        for direction in ("ASC", "DESC"):
            add(_TOPIC_BY_COL[sel], f"SELECT {sel} FROM articles ORDER BY {key} {direction}")
    for direction in ("ASC", "DESC"):
        add("AuthorList", f"SELECT author_name FROM article_author ORDER BY author_position {direction}")
    for col in NUMERIC_COLS:
        add(_TOPIC_BY_COL[col], f"SELECT {col}, COUNT(*) FROM articles GROUP BY {col}")
    add("AuthorCount",
        "SELECT author_count, COUNT(*) FROM articles GROUP BY author_count ORDER BY author_count DESC")
    add("TitleWordCount",
        "SELECT title_word_count, COUNT(*) FROM articles GROUP BY title_word_count ORDER BY COUNT(*) DESC")
    add("ReferenceCount",
        "SELECT reference_count, COUNT(*) FROM articles GROUP BY reference_count ORDER BY reference_count DESC")
    add("AuthorRelation",
        "SELECT author_position, COUNT(*) FROM article_author GROUP BY author_position ORDER BY author_position ASC")
    return out


def _filtering() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"flt{i:03d}", "Filtering", topic, sql, specs))

    pairs = _pair_grid()
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        for op in ("=", ">", "<", ">=", "<=", "<>"):
            add(_TOPIC_BY_COL[sel],
                f"SELECT {sel} FROM articles WHERE {cond} {op} {{{ph}}}",
                {ph: _value_spec(cond)})
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE {cond} >= {{{ph}-lo}} AND {cond} <= {{{ph}-hi}}",
            {f"{ph}-lo": _value_spec(cond), f"{ph}-hi": _value_spec(cond)})
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE {cond} = {{{ph}-1}} OR {cond} = {{{ph}-2}}",
            {f"{ph}-1": _value_spec(cond), f"{ph}-2": _value_spec(cond)})
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE {cond} BETWEEN {{{ph}-lo}} AND {{{ph}-hi}}",
            {f"{ph}-lo": _value_spec(cond), f"{ph}-hi": _value_spec(cond)})
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE {cond} IN ({{{ph}-list}})",
            {f"{ph}-list": {"kind": "column_value_list", "table": "articles",
                            "column": cond, "count": 2}})
    for sel in OUT_COLS:
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE article_title LIKE '%{{title-token}}%'",
            {"title-token": {"kind": "text_token", "table": "articles", "column": "article_title"}})
    for sel, cond in pairs:
        add(_TOPIC_BY_COL[sel],
            f"SELECT {sel} FROM articles WHERE {cond} % 2 = {{parity}}",
            {"parity": {"kind": "choice", "values": [0, 1]}})
    position_spec = {"kind": "int_range", "table": "article_author", "column": "author_position"}
    for op in ("=", "<", ">"):
        add("AuthorList",
            f"SELECT author_name FROM article_author WHERE author_position {op} {{author-position}}",
            {"author-position": position_spec})
    add("AuthorRelation",
        "SELECT author_position FROM article_author WHERE author_name = '{author-name}'",
        {"author-name": {"kind": "column_value", "table": "article_author", "column": "author_name"}})
    return out


def _filtering_aggregating() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"fag{i:03d}", "Filtering+Aggregating", topic, sql, specs))

    for fn in ("MAX", "MIN", "SUM", "AVG", "COUNT"):
        for target in NUMERIC_COLS:
            for cond in NUMERIC_COLS:
                if cond == target:
                    continue
                ph = _PLACEHOLDER_BY_COL[cond]
                for op in ("=", ">", "<"):
                    add(_TOPIC_BY_COL[target],
                        f"SELECT {fn}({target}) FROM articles WHERE {cond} {op} {{{ph}}}",
                        {ph: _value_spec(cond)})
    for cond in NUMERIC_COLS:
        ph = _PLACEHOLDER_BY_COL[cond]
        for op in ("=", ">", "<", ">=", "<="):
            add("TitleList",
                f"SELECT COUNT(*) FROM articles WHERE {cond} {op} {{{ph}}}",
                {ph: _value_spec(cond)})
    token_spec = {"kind": "text_token", "table": "articles", "column": "article_title"}
    add("TitleList",
        "SELECT COUNT(*) FROM articles WHERE article_title LIKE '%{title-token}%'",
        {"title-token": token_spec})
    add("TitleWordCount",
        "SELECT SUM(title_word_count) FROM articles WHERE article_title LIKE '%{title-token}%'",
        {"title-token": token_spec})
    return out


def _filtering_sorting() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"fst{i:03d}", "Filtering+Sorting", topic, sql, specs))

    pairs = _pair_grid()
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        for op in (">", "<", ">="):
            for direction in ("ASC", "DESC"):
                add(_TOPIC_BY_COL[sel],
                    f"SELECT {sel} FROM articles WHERE {cond} {op} {{{ph}}} "
                    f"ORDER BY {cond} {direction}",
                    {ph: _value_spec(cond)})
    for sel, cond in pairs:
        for direction in ("ASC", "DESC"):
            add(_TOPIC_BY_COL[sel],
                f"SELECT {sel} FROM articles WHERE {cond} % 2 = {{parity}} "
                f"ORDER BY {cond} {direction}",
                {"parity": {"kind": "choice", "values": [0, 1]}})
    for sel, cond in pairs:
        ph = _PLACEHOLDER_BY_COL[cond]
        for direction in ("ASC", "DESC"):
            add(_TOPIC_BY_COL[sel],
                f"SELECT {sel} FROM articles WHERE {cond} BETWEEN {{{ph}-lo}} AND {{{ph}-hi}} "
                f"ORDER BY {cond} {direction}",
                {f"{ph}-lo": _value_spec(cond), f"{ph}-hi": _value_spec(cond)})
    token_spec = {"kind": "text_token", "table": "articles", "column": "article_title"}
    for sel in OUT_COLS:
        for direction in ("ASC", "DESC"):
            add(_TOPIC_BY_COL[sel],
                f"SELECT {sel} FROM articles WHERE article_title LIKE '%{{title-token}}%' "
                f"ORDER BY title_word_count {direction}",
                {"title-token": token_spec})
    position_spec = {"kind": "int_range", "table": "article_author", "column": "author_position"}
    for op in ("<", "<=", ">"):
        for direction in ("ASC", "DESC"):
            add("AuthorList",
                f"SELECT author_name FROM article_author WHERE author_position {op} "
                f"{{author-position}} ORDER BY author_position {direction}",
                {"author-position": position_spec})
    name_token = {"kind": "text_token", "table": "article_author", "column": "author_name"}
    for direction in ("ASC", "DESC"):
        add("AuthorList",
            f"SELECT author_name FROM article_author WHERE author_name LIKE '%{{name-token}}%' "
            f"ORDER BY author_position {direction}",
            {"name-token": name_token})
    return out


def _relational_filtering() -> List[QueryTemplate]:
    out = []
    i = 0

    def add(topic, sql, specs=None):
        nonlocal i
        i += 1
        out.append(make_template(f"rel{i:03d}", "RelationalFiltering", topic, sql, specs))

    citing = "SELECT article_id_citing FROM citing_cited"
    cited = "SELECT article_id_cited FROM citing_cited"
    add("CitationRelation",
        f"SELECT COUNT(*) FROM articles WHERE article_id NOT IN ({citing}) "
        f"AND article_id IN ({cited})")
    add("CitationRelation",
        f"SELECT COUNT(*) FROM articles WHERE article_id IN ({citing}) "
        f"AND article_id NOT IN ({cited})")
    add("CitationRelation",
        f"SELECT COUNT(*) FROM articles WHERE article_id NOT IN ({citing}) "
        f"AND article_id NOT IN ({cited})")
    add("CitationRelation", f"SELECT COUNT(*) FROM articles WHERE article_id IN ({citing})")
    add("CitationRelation", f"SELECT COUNT(*) FROM articles WHERE article_id IN ({cited})")
    add("CitationRelation", f"SELECT article_title FROM articles WHERE article_id IN ({cited})")
    add("CitationRelation", f"SELECT article_title FROM articles WHERE article_id NOT IN ({citing})")
    add("CitationRelation", f"SELECT article_title FROM articles WHERE article_id NOT IN ({cited})")
    add("CitationRelation", "SELECT COUNT(DISTINCT article_id_citing) FROM citing_cited")
    add("CitationRelation", "SELECT COUNT(DISTINCT article_id_cited) FROM citing_cited")
    add("CitationRelation",
        "SELECT article_title FROM articles WHERE article_id IN "
        "(SELECT article_id_cited FROM citing_cited WHERE article_id_citing IN "
        "(SELECT article_id FROM articles WHERE author_count > {author-count}))",
        {"author-count": _value_spec("author_count")})
    add("CitationRelation",
        "SELECT COUNT(*) FROM citing_cited WHERE article_id_citing IN "
        "(SELECT article_id FROM articles WHERE reference_count > {reference-count})",
        {"reference-count": _value_spec("reference_count")})
    for op in ("=", ">"):
        add("AuthorRelation",
            "SELECT author_name FROM article_author WHERE article_id IN "
            f"(SELECT article_id FROM articles WHERE author_count {op} {{author-count}})",
            {"author-count": _value_spec("author_count")})
    add("AuthorRelation",
        "SELECT author_name FROM article_author WHERE article_id IN "
        "(SELECT article_id FROM articles WHERE reference_count > {reference-count})",
        {"reference-count": _value_spec("reference_count")})
    add("AuthorRelation",
        "SELECT author_name FROM article_author WHERE article_id IN "
        "(SELECT article_id FROM articles WHERE title_word_count < {title-word-count})",
        {"title-word-count": _value_spec("title_word_count")})
    add("AuthorRelation",
        "SELECT article_title FROM articles WHERE article_id IN "
        "(SELECT article_id FROM article_author WHERE author_name = '{author-name}')",
        {"author-name": {"kind": "column_value", "table": "article_author",
                         "column": "author_name"}})
    add("AuthorRelation",
        "SELECT COUNT(*) FROM article_author WHERE article_id IN "
        "(SELECT article_id FROM articles WHERE author_count >= {author-count})",
        {"author-count": _value_spec("author_count")})
    add("AuthorRelation",
        "SELECT author_name FROM article_author WHERE author_position = 0 "
        f"AND article_id IN ({cited})")
    add("AuthorRelation",
        "SELECT author_name FROM article_author WHERE author_position = 0 "
        f"AND article_id IN ({citing})")
    return out


EXPECTED_SKILL_COUNTS = {
    "Aggregating": 20,
    "Sorting": 27,
    "Filtering": 107,
    "Filtering+Aggregating": 107,
    "Filtering+Sorting": 106,
    "RelationalFiltering": 20,
}


def build_bank() -> List[QueryTemplate]:
    """Expand all families and verify the per-skill counts."""
    bank = (
        _aggregating()
        + _sorting()
        + _filtering()
        + _filtering_aggregating()
        + _filtering_sorting()
        + _relational_filtering()
    )
    counts: Dict[str, int] = {}
    for t in bank:
        counts[t.skill] = counts.get(t.skill, 0) + 1
    if counts != EXPECTED_SKILL_COUNTS:
        raise AssertionError(f"bank skill counts {counts} != {EXPECTED_SKILL_COUNTS}")
    ids = [t.template_id for t in bank]
    if len(set(ids)) != len(ids):
        raise AssertionError("duplicate template ids in bank")
    return bank
