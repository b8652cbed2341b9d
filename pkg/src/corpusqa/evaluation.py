"""Evaluation harness: prompt rendering, sampling, and EM/F1 scoring.

Scoring is a pure function of (prediction, gold, normalization profile).
Exact match is order-sensitive (sorting questions make order semantic) while
token F1 is an order-insensitive bag-of-tokens score for partial credit. The
normalization profile is fixed and versioned because unversioned normalization
makes scores incomparable across runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Dict, List, Optional, Sequence, Union

from .assembly import ContextDocument
from .database import ARTICLE_AUTHOR, ARTICLES, CITING_CITED, MetadataDatabase
from .errors import ContextLengthError
from .llm_client import ChatBackend
from .sql_engine import select_output_kind
from .templates import BenchmarkInstance
from .tokenizer import DEFAULT_TOKENIZER, TokenizerSpec, tokenize_count

FULL_TEXT = "full_text"
DB_TABLES = "db_tables"

_WS_RE = re.compile(r"\s+")
_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?$")


@dataclass(frozen=True)
class NormalizationProfile:
    """Versioned answer normalization applied before scoring."""

    version: str = "v1"
    casefold: bool = True
    collapse_whitespace: bool = True
    normalize_separators: bool = True
    strip_trailing_period: bool = True
    numeric_by_value: bool = True


PROFILE_V1 = NormalizationProfile()


def _canonical_token(token: str, profile: NormalizationProfile) -> str:
    if profile.numeric_by_value and _NUMBER_RE.match(token):
        value = float(token)
        if value == int(value):
            return str(int(value))
        return repr(value)
    return token


def normalize_answer(text: str, profile: NormalizationProfile = PROFILE_V1) -> str:
    """Canonical form: trim, one trailing period off, casefold, tidy separators."""
    s = text.strip()
    if profile.strip_trailing_period and s.endswith("."):
        s = s[:-1]
    if profile.casefold:
        s = s.casefold()
    if profile.normalize_separators:
        parts = [p.strip() for p in s.split(",")]
        parts = [p for p in parts if p]
    else:
        parts = [s]
    out_parts = []
    for part in parts:
        if profile.collapse_whitespace:
            tokens = _WS_RE.split(part)
        else:
            tokens = [part]
        tokens = [_canonical_token(t, profile) for t in tokens if t]
        out_parts.append(" ".join(tokens))
    return ", ".join(out_parts)


def answer_tokens(text: str, profile: NormalizationProfile = PROFILE_V1) -> List[str]:
    """Bag-of-tokens view: normalized, split on commas and whitespace."""
    normalized = normalize_answer(text, profile)
    if not normalized:
        return []
    return [t for part in normalized.split(", ") for t in part.split(" ") if t]


def exact_match(pred: str, gold: str, profile: NormalizationProfile = PROFILE_V1) -> int:
    return int(normalize_answer(pred, profile) == normalize_answer(gold, profile))


def f1_score(pred: str, gold: str, profile: NormalizationProfile = PROFILE_V1) -> float:
    pred_tokens = answer_tokens(pred, profile)
    gold_tokens = answer_tokens(gold, profile)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    gold_bag: Dict[str, int] = {}
    for t in gold_tokens:
        gold_bag[t] = gold_bag.get(t, 0) + 1
    overlap = 0
    for t in pred_tokens:
        if gold_bag.get(t, 0) > 0:
            gold_bag[t] -= 1
            overlap += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Failure flags (per sample; heuristic approximations documented in reports)


def null_answer_flag(pred: str, gold: str, profile: NormalizationProfile = PROFILE_V1) -> bool:
    """Model fell back to NULL although the gold answer is not NULL."""
    return normalize_answer(pred, profile) == "null" and normalize_answer(gold, profile) != "null"


def format_violation_flag(pred: str, sql: str, profile: NormalizationProfile = PROFILE_V1) -> bool:
    """Answer type (numeric vs text) mismatches what the SELECT clause implies."""
    normalized = normalize_answer(pred, profile)
    if not normalized or normalized == "null":
        return False
    expected = select_output_kind(sql)
    tokens = answer_tokens(pred, profile)
    pred_numeric = all(_NUMBER_RE.match(t) for t in tokens)
    if expected == "numeric":
        return not pred_numeric
    if expected in ("name", "title"):
        return pred_numeric
    return False


def partial_answer_flag(pred: str, gold: str, profile: NormalizationProfile = PROFILE_V1) -> bool:
    """Gold is a multi-item list and the prediction is a proper non-empty sub-bag."""
    gold_norm = normalize_answer(gold, profile)
    if ", " not in gold_norm:
        return False
    pred_tokens = answer_tokens(pred, profile)
    gold_tokens = answer_tokens(gold, profile)
    if not pred_tokens or len(pred_tokens) >= len(gold_tokens):
        return False
    bag: Dict[str, int] = {}
    for t in gold_tokens:
        bag[t] = bag.get(t, 0) + 1
    for t in pred_tokens:
        if bag.get(t, 0) == 0:
            return False
        bag[t] -= 1
    return True


# ---------------------------------------------------------------------------
# Prompt rendering

_EVAL_MARKERS = re.compile(
    r"\{(scientific articles|question|the table of articles|"
    r"the table of article-author|the table of citing-cited)\}"
)


def _render_eval(template_name: str, values: Dict[str, str]) -> str:
    template = resources.files("corpusqa.prompts").joinpath(template_name).read_text(encoding="utf-8")
    return _EVAL_MARKERS.sub(lambda m: values[m.group(1)], template)


def render_prompt_fulltext(doc: Union[ContextDocument, str], question: str) -> str:
    """Full-text evaluation prompt; substitution is literal (no re-expansion)."""
    text = doc.text if isinstance(doc, ContextDocument) else doc
    if not text or not question:
        raise ValueError("context document and question must be non-empty")
    return _render_eval("eval_full_text.txt", {"scientific articles": text, "question": question})


def render_prompt_tables(db: MetadataDatabase, question: str) -> str:
    """Database-tables evaluation prompt embedding the three CSV dumps."""
    if not question:
        raise ValueError("question must be non-empty")
    return _render_eval(
        "eval_db_tables.txt",
        {
            "question": question,
            "the table of articles": db.table_csv(ARTICLES).rstrip("\n"),
            "the table of article-author": db.table_csv(ARTICLE_AUTHOR).rstrip("\n"),
            "the table of citing-cited": db.table_csv(CITING_CITED).rstrip("\n"),
        },
    )


def render_reasoning_prompt(doc: Union[ContextDocument, str], question: str) -> str:
    """Reasoning-trace training prompt (boxed final answer)."""
    text = doc.text if isinstance(doc, ContextDocument) else doc
    if not text or not question:
        raise ValueError("context document and question must be non-empty")
    return _render_eval("reasoning_trace.txt", {"scientific articles": text, "question": question})


def query_model(backend: ChatBackend, prompt: str, n: int) -> List[str]:
    """Collect n independent samples; raw text is preserved verbatim."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return backend.complete(prompt, n=n)


# ---------------------------------------------------------------------------
# Record and loop


@dataclass
class EvalRecord:
    instance_id: str
    model: str
    context_mode: str
    samples: List[str] = field(default_factory=list)
    em_per_sample: List[int] = field(default_factory=list)
    f1_per_sample: List[float] = field(default_factory=list)
    mean_em: Optional[float] = None
    mean_f1: Optional[float] = None
    null_answer: bool = False
    format_violation: bool = False
    partial_answer: bool = False
    unanswerable: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "EvalRecord":
        return cls(**json.loads(line))


@dataclass
class EvalConfig:
    context_mode: str = DB_TABLES
    samples_per_question: int = 3
    profile: NormalizationProfile = PROFILE_V1
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER
    levels: Optional[Sequence[str]] = None
    skills: Optional[Sequence[str]] = None
    topics: Optional[Sequence[str]] = None

    def __post_init__(self):
        if self.samples_per_question < 1:
            raise ValueError("samples_per_question must be >= 1")
        if self.context_mode not in (FULL_TEXT, DB_TABLES):
            raise ValueError(f"unknown context_mode {self.context_mode!r}")


def score_record(record: EvalRecord, inst: BenchmarkInstance,
                 profile: NormalizationProfile = PROFILE_V1) -> None:
    """Fill per-sample scores, means, and failure flags in place."""
    record.em_per_sample = [exact_match(s, inst.gold_answer, profile) for s in record.samples]
    record.f1_per_sample = [f1_score(s, inst.gold_answer, profile) for s in record.samples]
    if record.samples:
        record.mean_em = sum(record.em_per_sample) / len(record.em_per_sample)
        record.mean_f1 = sum(record.f1_per_sample) / len(record.f1_per_sample)
    record.null_answer = any(null_answer_flag(s, inst.gold_answer, profile) for s in record.samples)
    record.format_violation = any(format_violation_flag(s, inst.sql, profile) for s in record.samples)
    record.partial_answer = any(partial_answer_flag(s, inst.gold_answer, profile) for s in record.samples)


def evaluate_instances(
    instances: Sequence[BenchmarkInstance],
    backend: ChatBackend,
    model_name: str,
    config: EvalConfig,
    contexts: Optional[Dict[str, ContextDocument]] = None,
    dbs: Optional[Dict[str, MetadataDatabase]] = None,
) -> List[EvalRecord]:
    """Render prompts, sample the model, and score every instance.

    Over-length prompts are never truncated: when the backend advertises a
    context window that the prompt exceeds (or it rejects the request), the
    record is flagged unanswerable and left unscored.
    """
    selected = [
        inst for inst in instances
        if (config.levels is None or inst.level in config.levels)
        and (config.skills is None or inst.skill in config.skills)
        and (config.topics is None or inst.topic in config.topics)
    ]
    records: List[EvalRecord] = []
    window = getattr(backend, "context_window", None)
    for inst in selected:
        if config.context_mode == FULL_TEXT:
            prompt = render_prompt_fulltext(contexts[inst.collection_id], inst.question)
        else:
            prompt = render_prompt_tables(dbs[inst.collection_id], inst.question)
        record = EvalRecord(instance_id=inst.instance_id, model=model_name,
                            context_mode=config.context_mode)
        if window is not None and tokenize_count(prompt, config.tokenizer) > window:
            record.unanswerable = True
            records.append(record)
            continue
        try:
            record.samples = query_model(backend, prompt, config.samples_per_question)
        except ContextLengthError:
            record.unanswerable = True
            records.append(record)
            continue
        score_record(record, inst, config.profile)
        records.append(record)
    return records


def write_records(records: Sequence[EvalRecord], path) -> None:
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path) -> List[EvalRecord]:
    from pathlib import Path

    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EvalRecord.from_json(line))
    return out


def summarize(records: Sequence[EvalRecord],
              instances: Sequence[BenchmarkInstance]) -> List[Dict[str, object]]:
    """Mean EM/F1 keyed by (model, level, context_mode); unanswerable counted apart."""
    by_id = {inst.instance_id: inst for inst in instances}
    groups: Dict[tuple, List[EvalRecord]] = {}
    for rec in records:
        inst = by_id.get(rec.instance_id)
        level = inst.level if inst else ""
        groups.setdefault((rec.model, level, rec.context_mode), []).append(rec)
    rows = []
    for (model, level, mode), recs in sorted(groups.items()):
        scored = [r for r in recs if not r.unanswerable and r.mean_em is not None]
        rows.append({
            "model": model,
            "level": level,
            "context_mode": mode,
            "instances": len(recs),
            "unanswerable": sum(1 for r in recs if r.unanswerable),
            "mean_em": round(sum(r.mean_em for r in scored) / len(scored), 6) if scored else None,
            "mean_f1": round(sum(r.mean_f1 for r in scored) / len(scored), 6) if scored else None,
        })
    return rows
