"""Command-line access to the engine: ingest, validate, interpolate, oracle,
recommend, embed, export.

Machine-readable JSON goes to stdout (stable key order, so identical inputs
and seed give byte-identical output); diagnostics go to stderr. Exit codes:
0 ok, 1 internal error, 2 input error, 3 capacity or budget refusal.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from .config import load_engine_config
from .dataset import evaluate_fact, load_dataset, recommend_facts, validate_fact
from .embedding import ReferenceEmbedder, export_embedding_table
from .errors import CapacityError, FactweaveError, InputError
from .facts import (
    fact_to_spec,
    generate_caption,
    parse_fact_spec,
    parse_facts_file,
    tokenize_fact,
)
from .oracle import oracle_interpolate
from .search import interpolate
from .story import INTERPOLATED, KEYFRAME, STORY_FORMS, render_markdown
from dataclasses import replace


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _fail(error: Exception) -> None:
    if isinstance(error, CapacityError):
        code = 3
    elif isinstance(error, InputError):
        code = 2
    elif isinstance(error, FactweaveError):
        code = 1
    else:
        code = 1
    click.echo(f"{type(error).__name__}: {error}", err=True)
    sys.exit(code)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        click.echo(f"FormatError: cannot read {path}: {e}", err=True)
        sys.exit(2)


def _load(path: str):
    return load_dataset(_read(path))


def _story_document(dataset, keyframes, interpolations, title: str) -> dict:
    """Assemble a CLI story document: keyframes with interpolated runs between."""
    pieces = []

    def piece(fact, provenance):
        view = evaluate_fact(dataset, fact)
        return {
            "provenance": provenance,
            "fact": fact_to_spec(fact),
            "caption": generate_caption(fact, view),
            "view": view.as_dict(),
        }

    for i, kf in enumerate(keyframes):
        pieces.append(piece(kf, KEYFRAME))
        if i < len(interpolations):
            for fact in interpolations[i]:
                pieces.append(piece(fact, INTERPOLATED))
    digest = hashlib.sha256(
        (dataset.id + "|" + "|".join(tokenize_fact(k) for k in keyframes)).encode("utf-8")
    ).hexdigest()[:12]
    return {
        "id": f"story-{digest}",
        "title": title,
        "datasetId": dataset.id,
        "form": "storyline",
        "pieces": pieces,
    }


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Engine configuration file (key = value format).")
@click.pass_context
def main(ctx, config_path):
    """factweave: data-story interpolation engine."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_engine_config(config_path)
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.pass_context
def ingest(ctx, csv_path):
    """Load a CSV and print the inferred schema summary."""
    try:
        dataset = _load(csv_path)
        _emit({
            "datasetId": dataset.id,
            "rowCount": dataset.row_count,
            "schema": [f.as_dict() for f in dataset.schema],
        })
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.argument("fact_path", type=click.Path())
@click.pass_context
def validate(ctx, csv_path, fact_path):
    """Validate a fact-spec document against a dataset."""
    config = ctx.obj["config"]
    try:
        dataset = _load(csv_path)
        fact = parse_fact_spec(_read(fact_path))
        report = validate_fact(dataset, fact, config.thresholds)
        _emit(report.as_dict())
        if not report.valid:
            worst = report.violations[0]
            click.echo(f"{worst.error_class}: {worst.message}", err=True)
            sys.exit(2)
    except FactweaveError as e:
        _fail(e)


def _parse_keyframes(path: str):
    keyframes = parse_facts_file(_read(path))
    if len(keyframes) < 2:
        click.echo("ParseError: keyframes file needs at least 2 facts", err=True)
        sys.exit(2)
    return keyframes


@main.command(name="interpolate")
@click.argument("csv_path", type=click.Path())
@click.argument("keyframes_path", type=click.Path())
@click.option("--n", default=3, show_default=True, help="Midpoints per keyframe pair.")
@click.option("--seed", default=7, show_default=True, help="Search rng seed.")
@click.option("--title", default="", help="Story title.")
@click.pass_context
def interpolate_cmd(ctx, csv_path, keyframes_path, n, seed, title):
    """Interpolate between each pair of succeeding keyframes."""
    config = ctx.obj["config"]
    try:
        dataset = _load(csv_path)
        keyframes = _parse_keyframes(keyframes_path)
        interp = replace(config.interpolation, n=n, rng_seed=seed)
        runs = []
        for fs, ft in zip(keyframes, keyframes[1:]):
            result = interpolate(
                dataset, fs, ft, config=interp,
                embedder_config=config.embedder, thresholds=config.thresholds,
            )
            for warning in result.warnings:
                click.echo(f"warning: {warning} between keyframes", err=True)
            runs.append(list(result.facts))
        _emit(_story_document(dataset, keyframes, runs, title))
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.option("--k", default=10, show_default=True)
@click.option("--filters", default=None, help="JSON array of {field, value} filters.")
@click.pass_context
def recommend(ctx, csv_path, k, filters):
    """Print the top-k recommended facts for a dataset."""
    from .facts import Filter, Subspace

    config = ctx.obj["config"]
    try:
        dataset = _load(csv_path)
        subspace = None
        if filters:
            entries = json.loads(filters)
            subspace = Subspace(tuple(Filter(e["field"], e["value"]) for e in entries))
        scored = recommend_facts(dataset, k, filters=subspace, caps=config.caps,
                                 thresholds=config.thresholds)
        _emit({
            "recommendations": [
                {"fact": fact_to_spec(s.fact), "significance": s.significance}
                for s in scored
            ]
        })
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.argument("keyframes_path", type=click.Path())
@click.option("--n", default=3, show_default=True)
@click.pass_context
def oracle(ctx, csv_path, keyframes_path, n):
    """Brute-force oracle interpolation (exhaustive enumeration + exact
    midpoint assignment); refuses oversized fact spaces."""
    config = ctx.obj["config"]
    try:
        dataset = _load(csv_path)
        keyframes = _parse_keyframes(keyframes_path)
        runs = []
        rewards = []
        for fs, ft in zip(keyframes, keyframes[1:]):
            result = oracle_interpolate(
                dataset, fs, ft, n, caps=config.caps,
                embedder_config=config.embedder, thresholds=config.thresholds,
            )
            runs.append(list(result.facts))
            rewards.append(result.reward)
        doc = _story_document(dataset, keyframes, runs, "oracle")
        doc["oracle"] = {"rewards": rewards}
        _emit(doc)
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("csv_path", type=click.Path())
@click.argument("fact_paths", type=click.Path(), nargs=-1, required=True)
@click.option("--table", "table_path", type=click.Path(), required=True,
              help="Output embedding-table file.")
@click.pass_context
def embed(ctx, csv_path, fact_paths, table_path):
    """Embed fact specs (validated against the dataset) into a table file."""
    config = ctx.obj["config"]
    try:
        dataset = _load(csv_path)
        facts = [parse_fact_spec(_read(p)) for p in fact_paths]
        for fact in facts:
            report = validate_fact(dataset, fact, config.thresholds)
            if not report.valid:
                worst = report.violations[0]
                click.echo(f"{worst.error_class}: {worst.message}", err=True)
                sys.exit(2)
        embedder = ReferenceEmbedder(config.embedder)
        text = export_embedding_table(facts, config.embedder, embedder=embedder)
        Path(table_path).write_text(text, encoding="utf-8")
        _emit({
            "table": table_path,
            "entries": len({tokenize_fact(f) for f in facts}),
            "dim": config.embedder.dimension,
        })
    except FactweaveError as e:
        _fail(e)


@main.command()
@click.argument("story_path", type=click.Path())
@click.option("--form", default="storyline", type=click.Choice(STORY_FORMS),
              show_default=True)
@click.option("--format", "output_format", default="json",
              type=click.Choice(["json", "markdown"]), show_default=True)
@click.pass_context
def export(ctx, story_path, form, output_format):
    """Render a story document as JSON (with the chosen form hint) or markdown."""
    try:
        doc = json.loads(_read(story_path))
    except json.JSONDecodeError as e:
        click.echo(f"ParseError: invalid story document: {e.msg}", err=True)
        sys.exit(2)
    if not isinstance(doc, dict) or "pieces" not in doc:
        click.echo("ParseError: story document needs a pieces list", err=True)
        sys.exit(2)
    doc["form"] = form
    if output_format == "markdown":
        sys.stdout.write(render_markdown(doc))
    else:
        _emit(doc)


@main.command()
@click.option("--host", default=None, help="Override listen host.")
@click.option("--port", default=None, type=int, help="Override listen port.")
@click.pass_context
def serve(ctx, host, port):
    """Run the authoring HTTP service."""
    import uvicorn

    from .service import create_app

    config = ctx.obj["config"]
    listen_host, _, listen_port = config.service.listen.partition(":")
    uvicorn.run(
        create_app(config),
        host=host or listen_host or "127.0.0.1",
        port=port or int(listen_port or 8787),
    )


if __name__ == "__main__":
    main()
