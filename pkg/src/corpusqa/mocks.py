"""Deterministic mock chat backends.

These stand in for converter and evaluee endpoints so the whole pipeline runs
offline: the round-trip protocol is exercised end to end (prompt rendering,
JSON reply parsing, execution equality) without any model. Converter mocks
keep an internal question->SQL map so back-translation needs no fragile text
parsing; evaluee mocks read the question out of the rendered prompt.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import uuid
from typing import Dict, List, Optional, Sequence

_SQL_MARKER = "The given SQL query:\n"
_QUESTION_MARKER = "The given natural language question:\n"
_EVAL_QUESTION_MARKER = "Question:"


def _extract(prompt: str, marker: str) -> Optional[str]:
    if marker not in prompt:
        return None
    tail = prompt.split(marker, 1)[1]
    return tail.split("\n\n", 1)[0].strip()


def extract_eval_question(prompt: str) -> str:
    """Pull the question out of a rendered evaluation prompt."""
    idx = prompt.rfind(_EVAL_QUESTION_MARKER)
    if idx < 0:
        return ""
    return prompt[idx + len(_EVAL_QUESTION_MARKER):].strip()


class _ConverterBase:
    """Shared plumbing: route a prompt to the right conversion direction."""

    def __init__(self):
        self._question_to_sql: Dict[str, str] = {}
        self.calls = 0

    def question_for(self, sql: str) -> str:
        raise NotImplementedError

    def sql_for(self, question: str) -> str:
        raise NotImplementedError

    def complete(self, prompt: str, *, n: int = 1, temperature=None) -> List[str]:
        self.calls += 1
        sql = _extract(prompt, _SQL_MARKER)
        if sql is not None:
            question = self.question_for(sql)
            reply = json.dumps({"sql": sql, "question": question})
            return [reply] * n
        question = _extract(prompt, _QUESTION_MARKER)
        if question is not None:
            reply = json.dumps({"question": question, "sql": self.sql_for(question)})
            return [reply] * n
        raise AssertionError("mock converter got a prompt it does not recognize")


class EchoConverter(_ConverterBase):
    """Back-translates every question to exactly the original SQL."""

    def question_for(self, sql: str) -> str:
        digest = hashlib.sha1(sql.encode("utf-8")).hexdigest()[:8]
        question = f"What does the collection say about item {digest}?"
        self._question_to_sql[question] = sql
        return question

    def sql_for(self, question: str) -> str:
        return self._question_to_sql[question]


class RewriteConverter(_ConverterBase):
    """Back-translates to a configured equivalent rewrite of the original SQL.

    SQL with no configured rewrite echoes unchanged.
    """

    def __init__(self, rewrites: Dict[str, str]):
        super().__init__()
        self._rewrites = dict(rewrites)

    def question_for(self, sql: str) -> str:
        digest = hashlib.sha1(sql.encode("utf-8")).hexdigest()[:8]
        question = f"Rephrased query {digest} about the collection?"
        self._question_to_sql[question] = self._rewrites.get(sql, sql)
        return question

    def sql_for(self, question: str) -> str:
        return self._question_to_sql[question]


class WrongConverter(_ConverterBase):
    """Always back-translates to one fixed unrelated query."""

    def __init__(self, wrong_sql: str = "SELECT COUNT(*) FROM articles"):
        super().__init__()
        self._wrong_sql = wrong_sql

    def question_for(self, sql: str) -> str:
        return f"An unrelated question about {hashlib.sha1(sql.encode()).hexdigest()[:8]}?"

    def sql_for(self, question: str) -> str:
        return self._wrong_sql


class GoldEchoModel:
    """Evaluee that always answers with the gold answer for the asked question."""

    def __init__(self, instances: Sequence):
        self._gold_by_question = {inst.question: inst.gold_answer for inst in instances}

    def complete(self, prompt: str, *, n: int = 1, temperature=None) -> List[str]:
        question = extract_eval_question(prompt)
        return [self._gold_by_question[question]] * n


class UuidModel:
    """Evaluee that answers every question with a fresh random UUID."""

    def __init__(self, rng: Optional[random.Random] = None):
        self._rng = rng or random.Random(0)
        self._lock = threading.Lock()

    def complete(self, prompt: str, *, n: int = 1, temperature=None) -> List[str]:
        with self._lock:
            return [str(uuid.UUID(int=self._rng.getrandbits(128))) for _ in range(n)]


class ScriptedModel:
    """Evaluee that replays a fixed list of answers (cycled)."""

    def __init__(self, answers: Sequence[str]):
        self._answers = list(answers)
        self._i = 0

    def complete(self, prompt: str, *, n: int = 1, temperature=None) -> List[str]:
        out = []
        for _ in range(n):
            out.append(self._answers[self._i % len(self._answers)])
            self._i += 1
        return out
