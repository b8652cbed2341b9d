"""SQL <-> natural-language conversion with round-trip validation.

A candidate query becomes a benchmark instance only if some attempt survives
the loop: generate a question from the SQL, translate the question back to
SQL, execute both against the collection's database, and accept when the two
serialized answers are identical strings. Acceptance is purely executional;
the SQL text is never compared. Up to ``max_attempts`` tries (default 10),
then the candidate is discarded with its attempt log.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Union

from .database import MetadataDatabase
from .errors import ConversionParseError, SqlError
from .llm_client import ChatBackend
from .sql_engine import execute_query, serialize_answer
from .templates import BenchmarkInstance, InstantiatedQuery, instance_id_for

DEFAULT_MAX_ATTEMPTS = 10
CONVERSION_TEMPERATURE = 0.7

_MARKER_RE = re.compile(r"\{(sql_query|question)\}")
_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _load_prompt(name: str) -> str:
    return resources.files("corpusqa.prompts").joinpath(name).read_text(encoding="utf-8")


def _render(template: str, values: Dict[str, str]) -> str:
    # Single-pass substitution: substituted text is never rescanned, so
    # braces inside the SQL or question cannot re-expand.
    return _MARKER_RE.sub(lambda m: values[m.group(1)], template)


def render_sql_to_nl_prompt(sql: str) -> str:
    if not sql:
        raise ValueError("sql must be non-empty")
    return _render(_load_prompt("sql_to_nl.txt"), {"sql_query": sql, "question": ""})


def render_nl_to_sql_prompt(question: str) -> str:
    if not question:
        raise ValueError("question must be non-empty")
    return _render(_load_prompt("nl_to_sql.txt"), {"sql_query": "", "question": question})


def extract_json_payload(text: str) -> dict:
    """Parse one JSON object out of a model reply.

    Tolerates a single fenced code block or stray prose around the object;
    anything else raises :class:`ConversionParseError`.
    """
    candidates = [text.strip()]
    fenced = _FENCE_RE.search(text)
    if fenced:
        candidates.append(fenced.group(1).strip())
    start, end = text.find("{"), text.rfind("}")
    if start >= 0 and end > start:
        candidates.append(text[start : end + 1])
    for cand in candidates:
        try:
            payload = json.loads(cand)
        except json.JSONDecodeError:
            continue
        if isinstance(payload, dict):
            return payload
    raise ConversionParseError(f"reply is not a JSON object: {text[:200]!r}")


@dataclass
class ConversionAttempt:
    direction: str  # sql_to_nl | nl_to_sql
    input_text: str
    raw_output: str = ""
    payload: Optional[dict] = None
    success: bool = False
    error: str = ""


def _convert(direction: str, prompt: str, backend: ChatBackend, key: str,
             input_text: str, temperature: float) -> ConversionAttempt:
    attempt = ConversionAttempt(direction=direction, input_text=input_text)
    attempt.raw_output = backend.complete(prompt, n=1, temperature=temperature)[0]
    try:
        payload = extract_json_payload(attempt.raw_output)
    except ConversionParseError as exc:
        attempt.error = str(exc)
        return attempt
    if key not in payload or not isinstance(payload[key], str) or not payload[key].strip():
        attempt.error = f"reply JSON lacks a usable {key!r} field"
        return attempt
    attempt.payload = payload
    attempt.success = True
    return attempt


def sql_to_question(sql: str, backend: ChatBackend,
                    temperature: float = CONVERSION_TEMPERATURE) -> ConversionAttempt:
    """One SQL -> question attempt; success means a parsable reply."""
    prompt = render_sql_to_nl_prompt(sql)
    return _convert("sql_to_nl", prompt, backend, "question", sql, temperature)


def question_to_sql(question: str, backend: ChatBackend,
                    temperature: float = CONVERSION_TEMPERATURE) -> ConversionAttempt:
    """One question -> SQL attempt; success means a parsable reply."""
    prompt = render_nl_to_sql_prompt(question)
    return _convert("nl_to_sql", prompt, backend, "sql", question, temperature)


@dataclass
class AttemptRecord:
    question: str = ""
    back_sql: str = ""
    gold_answer: str = ""
    back_answer: str = ""
    accepted: bool = False
    error: str = ""


@dataclass
class Discarded:
    """A candidate that failed round-trip validation ``max_attempts`` times."""

    sql: str
    collection_id: str
    attempts: List[AttemptRecord] = field(default_factory=list)


@dataclass
class ValidationStats:
    accepted: int = 0
    discarded: int = 0
    attempts_total: int = 0

    @property
    def success_rate(self) -> float:
        done = self.accepted + self.discarded
        return self.accepted / done if done else 0.0


def _round_trip(
    candidate: Union[BenchmarkInstance, InstantiatedQuery],
    db: MetadataDatabase,
    backend: ChatBackend,
    max_attempts: int,
    temperature: float,
):
    if isinstance(candidate, InstantiatedQuery):
        candidate = BenchmarkInstance(
            instance_id=instance_id_for(candidate.collection_id, candidate.template_id, candidate.sql),
            collection_id=candidate.collection_id,
            level="",
            skill="",
            topic="",
            sql=candidate.sql,
            question="",
            gold_answer=serialize_answer(execute_query(db, candidate.sql)),
            template_id=candidate.template_id,
        )
    gold = candidate.gold_answer
    records: List[AttemptRecord] = []
    for _ in range(max_attempts):
        record = AttemptRecord(gold_answer=gold)
        records.append(record)
        forward = sql_to_question(candidate.sql, backend, temperature)
        if not forward.success:
            record.error = f"sql_to_nl: {forward.error}"
            continue
        record.question = forward.payload["question"]
        backward = question_to_sql(record.question, backend, temperature)
        if not backward.success:
            record.error = f"nl_to_sql: {backward.error}"
            continue
        record.back_sql = backward.payload["sql"]
        try:
            record.back_answer = serialize_answer(execute_query(db, record.back_sql))
        except SqlError as exc:
            record.error = f"back-translated SQL failed: {exc}"
            continue
        if record.back_answer == gold:
            record.accepted = True
            candidate.question = record.question
            return candidate, records
        record.error = "results differ"
    discarded = Discarded(sql=candidate.sql, collection_id=candidate.collection_id, attempts=records)
    return discarded, records


def round_trip_validate(
    candidate: Union[BenchmarkInstance, InstantiatedQuery],
    db: MetadataDatabase,
    backend: ChatBackend,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    temperature: float = CONVERSION_TEMPERATURE,
) -> Union[BenchmarkInstance, Discarded]:
    """Validate one candidate query; returns an instance or ``Discarded``.

    Equality is judged on serialized answers from executing the original and
    back-translated SQL against ``db``. Transport failures propagate as
    pipeline errors; converter noise (bad JSON, unexecutable SQL) just burns
    an attempt.
    """
    outcome, _ = _round_trip(candidate, db, backend, max_attempts, temperature)
    return outcome


def validate_candidates(
    candidates: Sequence[BenchmarkInstance],
    dbs: Dict[str, MetadataDatabase],
    backend: ChatBackend,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> tuple:
    """Round-trip a batch; returns (instances, discards, stats)."""
    accepted: List[BenchmarkInstance] = []
    discards: List[Discarded] = []
    stats = ValidationStats()
    for cand in candidates:
        outcome, records = _round_trip(
            cand, dbs[cand.collection_id], backend, DEFAULT_MAX_ATTEMPTS if max_attempts is None else max_attempts,
            CONVERSION_TEMPERATURE,
        )
        stats.attempts_total += len(records)
        if isinstance(outcome, Discarded):
            discards.append(outcome)
            stats.discarded += 1
        else:
            accepted.append(outcome)
            stats.accepted += 1
    return accepted, discards, stats
