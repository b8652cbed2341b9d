"""Command-line entry point: one subcommand per pipeline stage plus export."""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import click

from .analysis import plot_data_series
from .config import load_config
from .errors import CorpusQAError
from .evaluation import read_records
from .pipeline import (
    EVAL_JSONL,
    REASONING_SFT_JSONL,
    export_split,
    read_collections,
    run_pipeline,
    _load_all_instances,
)


def _config(ctx) -> object:
    cfg = load_config(ctx.obj["config_path"])
    if ctx.obj["seed"] is not None:
        cfg = dataclasses.replace(cfg, seed=ctx.obj["seed"])
    return cfg


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Pipeline configuration file (YAML or JSON).")
@click.option("--seed", type=int, default=None, help="Override the config RNG seed.")
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
@click.pass_context
def main(ctx, config_path, seed, verbose):
    """Benchmark construction and evaluation pipeline."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed


def _stage_command(name: str, stage: str, help_text: str):
    @main.command(name=name, help=help_text)
    @click.pass_context
    def _cmd(ctx):
        try:
            run_pipeline(_config(ctx), [stage])
        except CorpusQAError as exc:
            raise click.ClickException(str(exc))
        click.echo(f"{name}: done")

    return _cmd


_stage_command("ingest", "ingest", "Load and validate the article corpus.")
_stage_command("assemble", "assemble", "Build article collections per level.")
_stage_command("build-db", "build_db", "Derive per-collection metadata databases (CSV dumps).")
_stage_command("generate", "generate", "Instantiate SQL templates and compute gold answers.")
_stage_command("validate", "validate", "Round-trip validate questions through the converter.")
_stage_command("evaluate", "evaluate", "Sample and score the configured evaluee models.")
_stage_command("report", "report", "Write breakdown, failure, and correlation reports.")


@main.command(name="evaluate-with", help="Evaluate with command-line endpoint overrides.")
@click.option("--mode", type=click.Choice(["full_text", "db_tables"]), default=None)
@click.option("--samples", type=int, default=None)
@click.option("--levels", default=None, help="Comma-separated level filter, e.g. 64K,128K.")
@click.option("--model", default=None, help="Evaluee model name (http endpoint).")
@click.option("--base-url", default=None, help="Evaluee base URL (http endpoint).")
@click.option("--max-inflight", type=int, default=None)
@click.pass_context
def evaluate_with(ctx, mode, samples, levels, model, base_url, max_inflight):
    cfg = _config(ctx)
    updates = {}
    if mode:
        updates["eval_context_mode"] = mode
    if samples:
        updates["eval_samples"] = samples
    if levels:
        updates["levels"] = [l.strip() for l in levels.split(",") if l.strip()]
    if max_inflight:
        updates["eval_max_inflight"] = max_inflight
    if model or base_url:
        if not (model and base_url):
            raise click.ClickException("--model and --base-url must be given together")
        updates["evaluees"] = [{"kind": "http", "model": model, "base_url": base_url}]
    cfg = dataclasses.replace(cfg, **updates)
    try:
        run_pipeline(cfg, ["evaluate"])
    except CorpusQAError as exc:
        raise click.ClickException(str(exc))
    click.echo("evaluate: done")


@main.command(name="export", help="Export a split as eval pairs or reasoning-SFT prompts.")
@click.option("--split", type=click.Choice(["train", "test"]), required=True)
@click.option("--format", "fmt", type=click.Choice([EVAL_JSONL, REASONING_SFT_JSONL]),
              default=EVAL_JSONL, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def export(ctx, split, fmt, out_path):
    cfg = _config(ctx)
    out_dir = Path(cfg.output_dir)
    instances = _load_all_instances(out_dir)
    contexts = None
    if fmt == REASONING_SFT_JSONL:
        contexts = {
            p.stem: p.read_text(encoding="utf-8")
            for p in (out_dir / "contexts").glob("*.md")
        }
    try:
        count = export_split(instances, split, fmt, out_path, contexts)
    except CorpusQAError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"export: wrote {count} rows to {out_path}")


@main.command(name="plot-data", help="Emit per-figure score series as JSON.")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Target file (default: <output_dir>/plot_data/series.json).")
@click.pass_context
def plot_data(ctx, out_path):
    cfg = _config(ctx)
    out_dir = Path(cfg.output_dir)
    instances = _load_all_instances(out_dir)
    collections = {c.collection_id: c for c in read_collections(out_dir / "collections.jsonl")}
    records = []
    for path in sorted((out_dir / "eval").glob("records_*.jsonl")):
        records.extend(read_records(path))
    series = plot_data_series(records, instances, collections)
    target = Path(out_path) if out_path else out_dir / "plot_data" / "series.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(series, indent=1), encoding="utf-8")
    click.echo(f"plot-data: wrote {target}")


if __name__ == "__main__":
    main()
