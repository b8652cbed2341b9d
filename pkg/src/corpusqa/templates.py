"""Query template library: loading, selection, and instantiation.

Templates are SQL strings over the three-table schema with named placeholders
like ``{reference-count}``. Each placeholder carries a sampling rule that
draws from values realized in the target collection's own database, so
instantiated queries stay meaningful. Row-returning queries that come out
empty are re-drawn a bounded number of times and then rejected; scalar
aggregates are always kept.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .database import MetadataDatabase
from .errors import ConfigurationError, InstantiationRejected
from .sql_engine import ResultTable, execute_query, is_scalar_aggregate, serialize_answer

SKILLS = (
    "Aggregating",
    "Sorting",
    "Filtering",
    "Filtering+Aggregating",
    "Filtering+Sorting",
    "RelationalFiltering",
)
TOPICS = (
    "AuthorCount",
    "AuthorList",
    "ReferenceCount",
    "TitleList",
    "TitleWordCount",
    "AuthorRelation",
    "CitationRelation",
)

DEFAULT_TEMPLATES_PER_COLLECTION = 10
MAX_REDRAWS = 20

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9-]*)\}")


@dataclass(frozen=True)
class QueryTemplate:
    template_id: str
    skill: str
    topic: str
    sql_text: str
    placeholder_specs: Tuple[Tuple[str, Tuple[Tuple[str, object], ...]], ...] = ()

    def specs(self) -> Dict[str, Dict[str, object]]:
        return {name: dict(spec) for name, spec in self.placeholder_specs}

    def placeholders(self) -> List[str]:
        return _PLACEHOLDER_RE.findall(self.sql_text)


def make_template(template_id: str, skill: str, topic: str, sql_text: str,
                  specs: Optional[Dict[str, Dict[str, object]]] = None) -> QueryTemplate:
    """Build a template, checking skill/topic labels and placeholder coverage."""
    if skill not in SKILLS:
        raise ConfigurationError(f"unknown skill {skill!r}")
    if topic not in TOPICS:
        raise ConfigurationError(f"unknown topic {topic!r}")
    specs = specs or {}
    names = set(_PLACEHOLDER_RE.findall(sql_text))
    if names != set(specs):
        raise ConfigurationError(
            f"template {template_id}: placeholders {sorted(names)} vs specs {sorted(specs)}"
        )
    frozen = tuple(sorted((n, tuple(sorted(s.items()))) for n, s in specs.items()))
    return QueryTemplate(template_id, skill, topic, sql_text, frozen)


def save_library(templates: Sequence[QueryTemplate], path) -> None:
    payload = [
        {
            "template_id": t.template_id,
            "skill": t.skill,
            "topic": t.topic,
            "sql_text": t.sql_text,
            "placeholder_specs": t.specs(),
        }
        for t in templates
    ]
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_library(path) -> List[QueryTemplate]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        make_template(t["template_id"], t["skill"], t["topic"], t["sql_text"],
                      t.get("placeholder_specs") or {})
        for t in payload
    ]


def load_builtin_library() -> List[QueryTemplate]:
    """The bundled 387-template library."""
    with resources.files("corpusqa.data").joinpath("templates.json").open(encoding="utf-8") as fh:
        payload = json.load(fh)
    return [
        make_template(t["template_id"], t["skill"], t["topic"], t["sql_text"],
                      t.get("placeholder_specs") or {})
        for t in payload
    ]


def select_templates(
    library: Sequence[QueryTemplate],
    rng: random.Random,
    n: int = DEFAULT_TEMPLATES_PER_COLLECTION,
    stratified: bool = False,
) -> List[QueryTemplate]:
    """Sample ``n`` distinct templates, uniform over the library by default.

    Stratified mode deals round-robin across skills instead, for callers that
    want every skill represented regardless of library composition.
    """
    if n > len(library):
        raise ConfigurationError(f"cannot select {n} templates from a library of {len(library)}")
    if not stratified:
        return rng.sample(list(library), n)
    by_skill: Dict[str, List[QueryTemplate]] = {s: [] for s in SKILLS}
    for t in library:
        by_skill[t.skill].append(t)
    pools = [rng.sample(ts, len(ts)) for ts in by_skill.values() if ts]
    out: List[QueryTemplate] = []
    i = 0
    while len(out) < n:
        pool = pools[i % len(pools)]
        if pool:
            out.append(pool.pop())
        i += 1
        if all(not p for p in pools):
            break
    return out


@dataclass(frozen=True)
class InstantiatedQuery:
    template_id: str
    collection_id: str
    sql: str
    bindings: Tuple[Tuple[str, str], ...]


@dataclass
class BenchmarkInstance:
    """One benchmark item; ``question`` is filled by round-trip validation."""

    instance_id: str
    collection_id: str
    level: str
    skill: str
    topic: str
    sql: str
    question: str
    gold_answer: str
    split: str = ""
    tie_affected: bool = False
    template_id: str = ""
    subject: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "BenchmarkInstance":
        return cls(**json.loads(line))


def write_instances(instances: Sequence[BenchmarkInstance], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(inst.to_json() + "\n")


def read_instances(path) -> List[BenchmarkInstance]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(BenchmarkInstance.from_json(line))
    return out


# ---------------------------------------------------------------------------
# Placeholder sampling


class _NoValues(Exception):
    pass


def _distinct_column_values(db: MetadataDatabase, table: str, column: str) -> list:
    idx = db.columns(table).index(column)
    return sorted({row[idx] for row in db.rows(table)})


_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9-]{2,}")


def _draw(spec: Dict[str, object], db: MetadataDatabase, rng: random.Random):
    kind = spec["kind"]
    if kind == "column_value":
        values = _distinct_column_values(db, spec["table"], spec["column"])
        if not values:
            raise _NoValues(f"{spec['table']}.{spec['column']} has no values")
        return rng.choice(values)
    if kind == "column_value_list":
        values = _distinct_column_values(db, spec["table"], spec["column"])
        if not values:
            raise _NoValues(f"{spec['table']}.{spec['column']} has no values")
        k = min(int(spec.get("count", 2)), len(values))
        return sorted(rng.sample(values, k))
    if kind == "int_range":
        values = _distinct_column_values(db, spec["table"], spec["column"])
        if not values:
            raise _NoValues(f"{spec['table']}.{spec['column']} has no values")
        return rng.randint(0, max(values))
    if kind == "choice":
        return rng.choice(list(spec["values"]))
    if kind == "text_token":
        words = set()
        for value in _distinct_column_values(db, spec["table"], spec["column"]):
            words.update(_WORD_RE.findall(str(value)))
        if not words:
            raise _NoValues(f"{spec['table']}.{spec['column']} has no usable tokens")
        return rng.choice(sorted(words))
    raise ConfigurationError(f"unknown placeholder rule kind {kind!r}")


def _render_binding(value) -> str:
    if isinstance(value, list):
        return ", ".join(_render_binding(v) for v in value)
    if isinstance(value, str):
        return value.replace("'", "''")
    return str(value)


def _order_range_pairs(bindings: Dict[str, object]) -> None:
    """Ensure <name>-lo <= <name>-hi for every range placeholder pair."""
    for name in list(bindings):
        if name.endswith("-lo"):
            partner = name[:-3] + "-hi"
            if partner in bindings and bindings[partner] < bindings[name]:
                bindings[name], bindings[partner] = bindings[partner], bindings[name]


def instantiate(
    template: QueryTemplate,
    db: MetadataDatabase,
    rng: random.Random,
    max_redraws: int = MAX_REDRAWS,
) -> InstantiatedQuery:
    """Bind every placeholder from the collection's own database.

    Raises :class:`InstantiationRejected` when no draw yields a non-empty
    result for a row-returning query (scalar aggregates always instantiate).
    """
    specs = template.specs()
    # Placeholder syntax never survives parsing; classify on a dummy binding.
    probe_sql = template.sql_text
    for name in specs:
        probe_sql = probe_sql.replace("{" + name + "}", "0")
    scalar = is_scalar_aggregate(probe_sql)

    attempts = max_redraws if specs else 1
    for _ in range(attempts):
        try:
            bindings = {name: _draw(spec, db, rng) for name, spec in sorted(specs.items())}
        except _NoValues as exc:
            raise InstantiationRejected(
                f"template {template.template_id} on {db.collection_id}: {exc}"
            ) from exc
        _order_range_pairs(bindings)
        sql = template.sql_text
        for name, value in bindings.items():
            sql = sql.replace("{" + name + "}", _render_binding(value))
        result = execute_query(db, sql)
        if scalar or result.rows:
            return InstantiatedQuery(
                template_id=template.template_id,
                collection_id=db.collection_id,
                sql=sql,
                bindings=tuple(sorted((k, _render_binding(v)) for k, v in bindings.items())),
            )
    raise InstantiationRejected(
        f"template {template.template_id} on {db.collection_id}: "
        f"empty result after {attempts} draws"
    )


def instance_id_for(collection_id: str, template_id: str, sql: str) -> str:
    digest = hashlib.sha1(f"{collection_id}|{template_id}|{sql}".encode("utf-8")).hexdigest()
    return "i" + digest[:12]


@dataclass
class GenerationStats:
    instantiated: int = 0
    rejected: int = 0
    rejections: List[str] = field(default_factory=list)


def generate_candidates(
    db: MetadataDatabase,
    library: Sequence[QueryTemplate],
    rng: random.Random,
    n: int = DEFAULT_TEMPLATES_PER_COLLECTION,
    level: str = "",
    subject: str = "",
    stratified: bool = False,
) -> Tuple[List[BenchmarkInstance], GenerationStats]:
    """Select templates, instantiate, and execute for gold answers.

    Returned instances have empty ``question`` fields; round-trip validation
    fills them in (or discards the candidate).
    """
    stats = GenerationStats()
    out: List[BenchmarkInstance] = []
    for template in select_templates(library, rng, n=n, stratified=stratified):
        try:
            iq = instantiate(template, db, rng)
        except InstantiationRejected as exc:
            stats.rejected += 1
            stats.rejections.append(str(exc))
            continue
        result: ResultTable = execute_query(db, iq.sql)
        out.append(
            BenchmarkInstance(
                instance_id=instance_id_for(db.collection_id, template.template_id, iq.sql),
                collection_id=db.collection_id,
                level=level,
                skill=template.skill,
                topic=template.topic,
                sql=iq.sql,
                question="",
                gold_answer=serialize_answer(result),
                tie_affected=result.tie_affected,
                template_id=template.template_id,
                subject=subject,
            )
        )
        stats.instantiated += 1
    return out, stats
