"""End-to-end pipeline orchestration with per-stage checkpointing.

Stages run in a fixed order (ingest, assemble, build_db, generate, validate,
evaluate, report). Each stage records a fingerprint of its configuration and
upstream outputs plus content hashes of everything it wrote; rerunning a
completed stage with unchanged inputs is a no-op. All randomness derives from
the mandatory config seed, so generation artifacts are byte-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .analysis import aggregate_scores, correlation_table, failure_patterns, plot_data_series
from .assembly import (
    Collection,
    STRATEGY_BFS,
    STRATEGY_DFS,
    STRATEGY_RANDOM,
    assemble_batch,
    concat_context,
)
from .config import (
    PipelineConfig,
    build_converter_backend,
    build_eval_backend,
    evaluee_name,
)
from .corpus import Corpus, load_corpus, save_corpus
from .database import MetadataDatabase, build_database
from .errors import ContextLengthError, PipelineError, StageOrderError
from .evaluation import (
    DB_TABLES,
    EvalConfig,
    EvalRecord,
    FULL_TEXT,
    query_model,
    render_prompt_fulltext,
    render_prompt_tables,
    render_reasoning_prompt,
    score_record,
    summarize,
    write_records,
    read_records,
)
from .nl_bridge import validate_candidates
from .templates import (
    BenchmarkInstance,
    generate_candidates,
    load_builtin_library,
    read_instances,
    write_instances,
)
from .tokenizer import tokenize_count

logger = logging.getLogger(__name__)

STAGES = ("ingest", "assemble", "build_db", "generate", "validate", "evaluate", "report")
_PREREQ = {stage: STAGES[i - 1] if i else None for i, stage in enumerate(STAGES)}

EVAL_JSONL = "eval_jsonl"
REASONING_SFT_JSONL = "reasoning_sft_jsonl"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_dict(cfg: PipelineConfig) -> dict:
    raw = asdict(cfg)
    raw["tokenizer"]["chars_per_token"] = str(raw["tokenizer"]["chars_per_token"])
    return raw


def _fingerprint(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path):
        self.path = out_dir / "manifest.json"
        self.data = {"stages": {}}
        if self.path.is_file():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))

    def stage_fingerprint(self, stage: str) -> str:
        return self.data["stages"].get(stage, {}).get("fingerprint", "")

    def is_current(self, stage: str, fingerprint: str, out_dir: Path) -> bool:
        entry = self.data["stages"].get(stage)
        if not entry or entry.get("fingerprint") != fingerprint:
            return False
        for rel, digest in entry.get("artifacts", {}).items():
            target = out_dir / rel
            if not target.is_file() or _sha256(target) != digest:
                return False
        return True

    def record(self, stage: str, fingerprint: str, out_dir: Path, artifacts: Sequence[Path]) -> None:
        self.data["stages"][stage] = {
            "fingerprint": fingerprint,
            "artifacts": {
                str(p.relative_to(out_dir)): _sha256(p) for p in sorted(artifacts)
            },
        }
        self.path.write_text(json.dumps(self.data, indent=1, sort_keys=True), encoding="utf-8")


# ---------------------------------------------------------------------------
# Artifact IO helpers


def _collection_to_json(coll: Collection) -> str:
    return json.dumps(
        {
            "collection_id": coll.collection_id,
            "level": coll.level,
            "strategy": coll.strategy,
            "article_ids": list(coll.article_ids),
            "total_tokens": coll.total_tokens,
            "subject": coll.subject,
        },
        ensure_ascii=False,
    )


def read_collections(path) -> List[Collection]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            out.append(
                Collection(
                    collection_id=raw["collection_id"],
                    level=raw["level"],
                    article_ids=tuple(raw["article_ids"]),
                    strategy=raw["strategy"],
                    total_tokens=raw["total_tokens"],
                    subject=raw.get("subject", ""),
                )
            )
    return out


def split_for_collection(collection_id: str, seed: int, train_fraction: float) -> str:
    """Deterministic by-collection split so contexts never leak across splits."""
    digest = hashlib.sha1(f"{seed}:{collection_id}".encode("utf-8")).hexdigest()
    fraction = int(digest[:12], 16) / float(1 << 48)
    return "train" if fraction < train_fraction else "test"


def _load_all_instances(out_dir: Path) -> List[BenchmarkInstance]:
    out: List[BenchmarkInstance] = []
    for path in sorted((out_dir / "instances").glob("*.jsonl")):
        out.extend(read_instances(path))
    return out


# ---------------------------------------------------------------------------
# Stages


def _stage_ingest(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, report = load_corpus(cfg.resolve_corpus_path(), cfg.tokenizer)
    corpus_path = out_dir / "corpus.jsonl"
    save_corpus(corpus, corpus_path)
    report_path = out_dir / "load_report.json"
    report_path.write_text(
        json.dumps(
            {
                "loaded": report.loaded,
                "dropped_missing_fulltext": report.dropped_missing_fulltext,
                "record_errors": [
                    {"record": e.record_ref, "field": e.field, "message": e.message}
                    for e in report.record_errors
                ],
            },
            indent=1,
        ),
        encoding="utf-8",
    )
    return [corpus_path, report_path]


def _strategy_counts(cfg: PipelineConfig) -> Dict[str, int]:
    total = cfg.collections_per_level
    ratio = cfg.random_to_traversal_ratio
    n_random = round(total * ratio / (ratio + 1.0)) if ratio > 0 else 0
    n_random = min(max(n_random, 0), total)
    n_trav = total - n_random
    return {
        STRATEGY_RANDOM: n_random,
        STRATEGY_DFS: (n_trav + 1) // 2,
        STRATEGY_BFS: n_trav // 2,
    }


def _stage_assemble(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, _ = load_corpus(out_dir / "corpus.jsonl", cfg.tokenizer)
    rng = random.Random(f"{cfg.seed}:assemble")
    cluster_ids = corpus.ids()
    collections: List[Collection] = []
    for level in cfg.levels:
        accepted: List[Collection] = []
        for strategy, count in _strategy_counts(cfg).items():
            if count:
                accepted.extend(
                    assemble_batch(corpus, cluster_ids, level, count, strategy, rng, accepted=accepted)
                )
        if len(accepted) < cfg.collections_per_level:
            logger.warning(
                "level %s: emitted %d of %d collections (overlap cap)",
                level, len(accepted), cfg.collections_per_level,
            )
        collections.extend(accepted)

    paths = []
    manifest_path = out_dir / "collections.jsonl"
    with manifest_path.open("w", encoding="utf-8") as fh:
        for coll in collections:
            fh.write(_collection_to_json(coll) + "\n")
    paths.append(manifest_path)
    ctx_dir = out_dir / "contexts"
    ctx_dir.mkdir(parents=True, exist_ok=True)
    for coll in collections:
        doc = concat_context(coll, corpus, cfg.tokenizer)
        target = ctx_dir / f"{coll.collection_id}.md"
        target.write_text(doc.text, encoding="utf-8")
        paths.append(target)
    return paths


def _stage_build_db(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, _ = load_corpus(out_dir / "corpus.jsonl", cfg.tokenizer)
    collections = read_collections(out_dir / "collections.jsonl")
    paths: List[Path] = []
    for coll in collections:
        db = build_database(coll, corpus)
        paths.extend(db.dump_csvs(out_dir / "dbs" / coll.collection_id))
    return paths


def _stage_generate(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, _ = load_corpus(out_dir / "corpus.jsonl", cfg.tokenizer)
    collections = read_collections(out_dir / "collections.jsonl")
    library = load_builtin_library()
    candidates: List[BenchmarkInstance] = []
    stats = {"instantiated": 0, "rejected": 0}
    for coll in collections:
        db = build_database(coll, corpus)
        rng = random.Random(f"{cfg.seed}:generate:{coll.collection_id}")
        cands, gen_stats = generate_candidates(
            db,
            library,
            rng,
            n=cfg.templates_per_collection,
            level=coll.level,
            subject=coll.subject,
            stratified=cfg.stratified_templates,
        )
        candidates.extend(cands)
        stats["instantiated"] += gen_stats.instantiated
        stats["rejected"] += gen_stats.rejected
    cand_path = out_dir / "candidates.jsonl"
    write_instances(candidates, cand_path)
    stats_path = out_dir / "generation_stats.json"
    stats_path.write_text(json.dumps(stats, indent=1), encoding="utf-8")
    return [cand_path, stats_path]


def _stage_validate(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, _ = load_corpus(out_dir / "corpus.jsonl", cfg.tokenizer)
    collections = {c.collection_id: c for c in read_collections(out_dir / "collections.jsonl")}
    candidates = read_instances(out_dir / "candidates.jsonl")
    dbs = {cid: build_database(coll, corpus) for cid, coll in collections.items()}
    backend = build_converter_backend(cfg.converter)
    accepted, discards, stats = validate_candidates(
        candidates, dbs, backend, max_attempts=cfg.max_round_trip_attempts
    )
    for inst in accepted:
        inst.split = split_for_collection(inst.collection_id, cfg.seed, cfg.train_fraction)

    paths: List[Path] = []
    inst_dir = out_dir / "instances"
    inst_dir.mkdir(parents=True, exist_ok=True)
    for old in inst_dir.glob("*.jsonl"):
        old.unlink()
    groups: Dict[tuple, List[BenchmarkInstance]] = {}
    for inst in accepted:
        groups.setdefault((inst.level, inst.split), []).append(inst)
    for (level, split), rows in sorted(groups.items()):
        target = inst_dir / f"{level}_{split}.jsonl"
        write_instances(rows, target)
        paths.append(target)
    stats_path = out_dir / "validation_stats.json"
    stats_path.write_text(
        json.dumps(
            {
                "accepted": stats.accepted,
                "discarded": stats.discarded,
                "attempts_total": stats.attempts_total,
                "success_rate": stats.success_rate,
                "discarded_sql": [d.sql for d in discards],
            },
            indent=1,
        ),
        encoding="utf-8",
    )
    paths.append(stats_path)
    return paths


def _evaluate_with_backend(
    instances: Sequence[BenchmarkInstance],
    backend,
    model_name: str,
    eval_config: EvalConfig,
    contexts: Optional[Dict[str, object]],
    dbs: Optional[Dict[str, MetadataDatabase]],
    max_inflight: int,
) -> List[EvalRecord]:
    """Parallel per-instance evaluation under the endpoint's in-flight cap."""
    window = getattr(backend, "context_window", None)
    lock = threading.Lock()
    records: Dict[str, EvalRecord] = {}

    def run_one(inst: BenchmarkInstance) -> None:
        if eval_config.context_mode == FULL_TEXT:
            prompt = render_prompt_fulltext(contexts[inst.collection_id], inst.question)
        else:
            prompt = render_prompt_tables(dbs[inst.collection_id], inst.question)
        record = EvalRecord(instance_id=inst.instance_id, model=model_name,
                            context_mode=eval_config.context_mode)
        if window is not None and tokenize_count(prompt, eval_config.tokenizer) > window:
            record.unanswerable = True
        else:
            try:
                record.samples = query_model(backend, prompt, eval_config.samples_per_question)
            except ContextLengthError:
                record.unanswerable = True
            else:
                score_record(record, inst, eval_config.profile)
        with lock:
            records[inst.instance_id] = record

    if max_inflight <= 1:
        for inst in instances:
            run_one(inst)
    else:
        with ThreadPoolExecutor(max_workers=max_inflight) as pool:
            list(pool.map(run_one, instances))
    return [records[inst.instance_id] for inst in instances]


def _stage_evaluate(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    corpus, _ = load_corpus(out_dir / "corpus.jsonl", cfg.tokenizer)
    collections = {c.collection_id: c for c in read_collections(out_dir / "collections.jsonl")}
    instances = [i for i in _load_all_instances(out_dir) if i.split == "test"]
    if not instances:
        raise PipelineError("no test-split instances to evaluate")
    dbs = {cid: build_database(coll, corpus) for cid, coll in collections.items()}
    contexts = {cid: concat_context(coll, corpus, cfg.tokenizer)
                for cid, coll in collections.items()}
    eval_config = EvalConfig(
        context_mode=cfg.eval_context_mode,
        samples_per_question=cfg.eval_samples,
        tokenizer=cfg.tokenizer,
    )
    rng = random.Random(f"{cfg.seed}:evaluate")
    paths: List[Path] = []
    eval_dir = out_dir / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    all_records: List[EvalRecord] = []
    for spec in cfg.evaluees:
        backend = build_eval_backend(spec, instances, rng)
        name = evaluee_name(spec)
        records = _evaluate_with_backend(
            instances, backend, name, eval_config, contexts, dbs, cfg.eval_max_inflight
        )
        target = eval_dir / f"records_{name}_{cfg.eval_context_mode}.jsonl"
        write_records(records, target)
        paths.append(target)
        all_records.extend(records)

    summary_path = eval_dir / "summary.csv"
    rows = summarize(all_records, instances)
    with summary_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["model", "level", "context_mode", "instances", "unanswerable",
                        "mean_em", "mean_f1"],
        )
        writer.writeheader()
        writer.writerows(rows)
    paths.append(summary_path)
    return paths


def _stage_report(cfg: PipelineConfig, out_dir: Path) -> List[Path]:
    collections = {c.collection_id: c for c in read_collections(out_dir / "collections.jsonl")}
    instances = _load_all_instances(out_dir)
    records: List[EvalRecord] = []
    for path in sorted((out_dir / "eval").glob("records_*.jsonl")):
        records.extend(read_records(path))
    report_dir = out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    paths: List[Path] = []
    models = sorted({r.model for r in records})
    for key in ("skill", "topic", "subject", "level"):
        target = report_dir / f"breakdown_{key}.csv"
        with target.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", key, "count", "mean_em", "mean_f1"])
            for model in models:
                model_records = [r for r in records if r.model == model]
                for row in aggregate_scores(model_records, instances, key, collections):
                    writer.writerow([model, row.group, row.count, row.mean_em, row.mean_f1])
        paths.append(target)

    failures = {}
    for model in models:
        model_records = [r for r in records if r.model == model]
        report = failure_patterns(model_records, instances)
        failures[model] = {
            "note": report.note,
            "per_skill": [asdict(s) for s in report.per_skill],
            "negation_count": report.negation_count,
            "negation_mean_em": report.negation_mean_em,
            "negation_mean_f1": report.negation_mean_f1,
            "complement_mean_em": report.complement_mean_em,
        }
    failures_path = report_dir / "failures.json"
    failures_path.write_text(json.dumps(failures, indent=1), encoding="utf-8")
    paths.append(failures_path)

    correlations = {}
    for model in models:
        model_records = [r for r in records if r.model == model]
        correlations[model] = correlation_table(model_records, instances, collections)
    corr_path = report_dir / "correlations.json"
    corr_path.write_text(json.dumps(correlations, indent=1), encoding="utf-8")
    paths.append(corr_path)
    return paths


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "assemble": _stage_assemble,
    "build_db": _stage_build_db,
    "generate": _stage_generate,
    "validate": _stage_validate,
    "evaluate": _stage_evaluate,
    "report": _stage_report,
}


def run_pipeline(cfg: PipelineConfig, stages: Optional[Sequence[str]] = None) -> dict:
    """Run the requested stages in order; completed stages are no-ops.

    Raises :class:`StageOrderError` when a requested stage's prerequisite has
    neither run before nor been requested ahead of it.
    """
    requested = list(stages) if stages else list(STAGES)
    for stage in requested:
        if stage not in STAGES:
            raise PipelineError(f"unknown stage {stage!r}; valid stages: {', '.join(STAGES)}")
    requested = [s for s in STAGES if s in requested]

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out_dir)
    cfg_fp = _fingerprint(json.dumps(_config_dict(cfg), sort_keys=True))

    planned = set(requested)
    for stage in requested:
        prereq = _PREREQ[stage]
        if prereq and prereq not in planned and not manifest.stage_fingerprint(prereq):
            raise StageOrderError(stage, prereq)

    for stage in requested:
        prereq = _PREREQ[stage]
        upstream_fp = manifest.stage_fingerprint(prereq) if prereq else ""
        fingerprint = _fingerprint(stage, cfg_fp, upstream_fp)
        if manifest.is_current(stage, fingerprint, out_dir):
            logger.info("stage %s is current; skipping", stage)
            continue
        logger.info("running stage %s", stage)
        artifacts = _STAGE_FUNCS[stage](cfg, out_dir)
        manifest.record(stage, fingerprint, out_dir, artifacts)
    return manifest.data


# ---------------------------------------------------------------------------
# Split export


def export_split(
    instances: Sequence[BenchmarkInstance],
    split: str,
    fmt: str,
    path,
    contexts: Optional[Dict[str, str]] = None,
) -> int:
    """Write one split as eval pairs or reasoning-SFT prompts; returns row count.

    ``contexts`` maps collection_id to full context text and is required for
    the reasoning format.
    """
    if fmt not in (EVAL_JSONL, REASONING_SFT_JSONL):
        raise PipelineError(f"unknown export format {fmt!r}")
    selected = [inst for inst in instances if inst.split == split]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for inst in selected:
            if fmt == EVAL_JSONL:
                row = {
                    "instance_id": inst.instance_id,
                    "context_ref": f"contexts/{inst.collection_id}.md",
                    "question": inst.question,
                    "gold": inst.gold_answer,
                }
            else:
                if contexts is None or inst.collection_id not in contexts:
                    raise PipelineError(
                        f"reasoning export needs context text for {inst.collection_id}"
                    )
                row = {
                    "instance_id": inst.instance_id,
                    "prompt": render_reasoning_prompt(contexts[inst.collection_id], inst.question),
                    "answer": inst.gold_answer,
                }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if not selected:
        logger.warning("export: split %r matched no instances; wrote an empty file", split)
    return len(selected)
