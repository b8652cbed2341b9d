"""Score breakdowns, factor correlations, and failure diagnostics.

Flag definitions are heuristic approximations of judgments that would
otherwise need human review; report headers say so. Everything here is
decidable from (record, instance) pairs alone, with no model access.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as scipy_stats

from .assembly import Collection
from .errors import ConfigurationError
from .evaluation import (
    EvalRecord,
    PROFILE_V1,
    format_violation_flag,
    null_answer_flag,
    partial_answer_flag,
)
from .templates import BenchmarkInstance

HEURISTIC_NOTE = (
    "format_violation and partial_answer rates are heuristic approximations "
    "of a manual analysis; treat them as bound estimates."
)

# Versioned so reported negation subsets stay comparable across runs.
NEGATION_MARKERS_V1 = ("not", "never", "no ", "without", "excluding")
_NEGATION_WORD_RE = re.compile(r"\b(not|never|without|excluding)\b", re.IGNORECASE)


@dataclass(frozen=True)
class FactorVector:
    """Per-instance factors correlated against model performance."""

    instance_id: str
    n_articles: int
    len_q: int
    len_sql: int
    len_a: int


def factor_vectors(
    instances: Sequence[BenchmarkInstance],
    collections: Dict[str, Collection],
) -> List[FactorVector]:
    out = []
    for inst in instances:
        coll = collections.get(inst.collection_id)
        out.append(
            FactorVector(
                instance_id=inst.instance_id,
                n_articles=len(coll.article_ids) if coll else 0,
                len_q=len(inst.question.split()),
                len_sql=len(inst.sql),
                len_a=len(inst.gold_answer.split()),
            )
        )
    return out


def pearson(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Product-moment correlation with a two-sided Student-t p-value.

    Requires at least three paired observations and nonzero variance on both
    sides.
    """
    if len(xs) != len(ys):
        raise ConfigurationError("pearson inputs must have equal length")
    n = len(xs)
    if n < 3:
        raise ConfigurationError("pearson needs at least 3 observations")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ConfigurationError("pearson is undefined for zero-variance input")
    r = float(dx @ dy) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), n - 2))
    return r, p


@dataclass
class GroupRow:
    group: str
    count: int
    mean_em: Optional[float]
    mean_f1: Optional[float]


_GROUP_KEYS = ("skill", "topic", "subject", "level")


def aggregate_scores(
    records: Sequence[EvalRecord],
    instances: Sequence[BenchmarkInstance],
    group_by: str,
    collections: Optional[Dict[str, Collection]] = None,
) -> List[GroupRow]:
    """Mean EM/F1 per group; empty groups keep their count with absent means."""
    if group_by not in _GROUP_KEYS:
        raise ConfigurationError(f"group_by must be one of {_GROUP_KEYS}")
    by_id = {inst.instance_id: inst for inst in instances}
    sums: Dict[str, List[float]] = {}
    for rec in records:
        inst = by_id.get(rec.instance_id)
        if inst is None or rec.unanswerable or rec.mean_em is None:
            continue
        if group_by == "subject" and not inst.subject and collections:
            coll = collections.get(inst.collection_id)
            key = coll.subject if coll else ""
        else:
            key = getattr(inst, group_by)
        bucket = sums.setdefault(key, [0.0, 0.0, 0.0])
        bucket[0] += 1
        bucket[1] += rec.mean_em
        bucket[2] += rec.mean_f1
    rows = []
    for key in sorted(sums):
        count, em_sum, f1_sum = sums[key]
        count = int(count)
        rows.append(
            GroupRow(
                group=key,
                count=count,
                mean_em=em_sum / count if count else None,
                mean_f1=f1_sum / count if count else None,
            )
        )
    return rows


def negation_subset(instances: Sequence[BenchmarkInstance]) -> List[BenchmarkInstance]:
    """Instances whose question carries a negation marker or whose SQL negates."""
    out = []
    for inst in instances:
        question = inst.question.casefold()
        sql = inst.sql.upper()
        hit = bool(_NEGATION_WORD_RE.search(question)) or "no " in question
        hit = hit or " NOT " in f" {sql} " or "<>" in sql
        if hit:
            out.append(inst)
    return out


@dataclass
class SkillFailureRates:
    skill: str
    samples: int
    null_rate: float
    format_violation_rate: float
    partial_answer_rate: float


@dataclass
class FailureReport:
    note: str
    per_skill: List[SkillFailureRates] = field(default_factory=list)
    negation_count: int = 0
    negation_mean_em: Optional[float] = None
    negation_mean_f1: Optional[float] = None
    complement_mean_em: Optional[float] = None
    skipped_records: int = 0


def failure_patterns(
    records: Sequence[EvalRecord],
    instances: Sequence[BenchmarkInstance],
) -> FailureReport:
    """Per-skill NULL / format-violation / partial-answer rates over samples."""
    by_id = {inst.instance_id: inst for inst in instances}
    per_skill: Dict[str, List[int]] = {}
    skipped = 0
    for rec in records:
        inst = by_id.get(rec.instance_id)
        if inst is None:
            skipped += 1
            continue
        if rec.unanswerable:
            continue
        bucket = per_skill.setdefault(inst.skill, [0, 0, 0, 0])
        for sample in rec.samples:
            bucket[0] += 1
            bucket[1] += null_answer_flag(sample, inst.gold_answer)
            bucket[2] += format_violation_flag(sample, inst.sql)
            bucket[3] += partial_answer_flag(sample, inst.gold_answer)

    report = FailureReport(note=HEURISTIC_NOTE, skipped_records=skipped)
    for skill in sorted(per_skill):
        total, nulls, fmt, partial = per_skill[skill]
        report.per_skill.append(
            SkillFailureRates(
                skill=skill,
                samples=total,
                null_rate=nulls / total if total else 0.0,
                format_violation_rate=fmt / total if total else 0.0,
                partial_answer_rate=partial / total if total else 0.0,
            )
        )

    negated = negation_subset(instances)
    negated_ids = {inst.instance_id for inst in negated}
    neg_scores = [r for r in records if r.instance_id in negated_ids and r.mean_em is not None]
    other_scores = [
        r for r in records if r.instance_id not in negated_ids and r.mean_em is not None
    ]
    report.negation_count = len(negated)
    if neg_scores:
        report.negation_mean_em = sum(r.mean_em for r in neg_scores) / len(neg_scores)
        report.negation_mean_f1 = sum(r.mean_f1 for r in neg_scores) / len(neg_scores)
    if other_scores:
        report.complement_mean_em = sum(r.mean_em for r in other_scores) / len(other_scores)
    return report


FACTORS = ("n_articles", "len_q", "len_sql", "len_a")


def correlation_table(
    records: Sequence[EvalRecord],
    instances: Sequence[BenchmarkInstance],
    collections: Dict[str, Collection],
) -> Dict[str, Dict[str, float]]:
    """Pearson (r, p) of each factor against per-instance mean EM."""
    factors = {fv.instance_id: fv for fv in factor_vectors(instances, collections)}
    pairs = [
        (factors[r.instance_id], r.mean_em)
        for r in records
        if r.mean_em is not None and r.instance_id in factors
    ]
    out: Dict[str, Dict[str, float]] = {}
    for name in FACTORS:
        xs = [getattr(fv, name) for fv, _ in pairs]
        ys = [em for _, em in pairs]
        try:
            r, p = pearson(xs, ys)
            out[name] = {"r": r, "p": p, "n": len(xs)}
        except ConfigurationError:
            out[name] = {"r": float("nan"), "p": float("nan"), "n": len(xs)}
    return out


def plot_data_series(
    records: Sequence[EvalRecord],
    instances: Sequence[BenchmarkInstance],
    collections: Optional[Dict[str, Collection]] = None,
) -> Dict[str, object]:
    """Per-figure JSON series: grouped breakdowns plus the correlation table."""
    series: Dict[str, object] = {"note": HEURISTIC_NOTE}
    for key in _GROUP_KEYS:
        rows = aggregate_scores(records, instances, key, collections)
        series[f"by_{key}"] = [
            {"group": r.group, "count": r.count, "mean_em": r.mean_em, "mean_f1": r.mean_f1}
            for r in rows
        ]
    if collections:
        series["correlations"] = correlation_table(records, instances, collections)
    return series
