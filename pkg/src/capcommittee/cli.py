"""Command-line surface: generate, evaluate, build-hard-split, calibrate,
and serve (the human-rating service)."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from capcommittee import pipeline
from capcommittee.calibration import SweepSpec, calibrate_temperature
from capcommittee.data import load_split, save_split
from capcommittee.gateway import ModelGateway
from capcommittee.prompts import GuardConfig, PromptVariant


def _variant_from_options(variant_json, language):
    flags = json.loads(variant_json) if variant_json else {}
    return PromptVariant(
        hard_problem_prefix=flags.get("hard_problem_prefix", True),
        uncertainty_language=flags.get("uncertainty_language", True),
        capitalized_one=flags.get("capitalized_one", True),
        target_language=language or flags.get("target_language"),
        extra_instruction=flags.get("extra_instruction"),
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)


@main.command()
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--format", "split_format", default="jsonl", type=click.Choice(["jsonl", "karpathy-json"]))
@click.option("--model", default="mock", help="summarizer registry entry")
@click.option("--captioner", default="blip", help="captioner family (sets default temperature)")
@click.option("--k", default=10, type=int)
@click.option("--temperature", default=None, type=float)
@click.option("--beams", default=16, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--source", default="captioner", type=click.Choice(["captioner", "references"]))
@click.option("--variant", "variant_json", default=None, help="JSON prompt-variant flags")
@click.option("--language", default=None, help="target output language")
@click.option("--max-commas", default=7, type=int)
@click.option("--max-regen", default=2, type=int)
@click.option("--out", "out_dir", default="runs", type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
def generate(split_path, split_format, model, captioner, k, temperature, beams,
             seed, source, variant_json, language, max_commas, max_regen, out_dir, cache_dir):
    """Sample candidates and summarize them for every image in a split."""
    split = load_split(split_path, format=split_format)
    config = pipeline.RunConfig(
        split_path=str(split_path),
        model=model,
        captioner=captioner,
        k=k,
        temperature=temperature,
        beams=beams,
        seed=seed,
        source=source,
        variant=_variant_from_options(variant_json, language),
        guard=GuardConfig(max_commas=max_commas, max_regen=max_regen),
    )
    fingerprint = pipeline._fingerprint(split_path)
    run_id = pipeline.make_run_id(config, fingerprint)
    run_dir = Path(out_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    pipeline.write_manifest(run_dir, config, fingerprint, run_id)

    gateway = ModelGateway.from_env(cache_dir=cache_dir)
    failures = pipeline.generate(split, config, gateway, run_dir)
    click.echo(f"run {run_id}: {len(split) - failures}/{len(split)} images -> {run_dir}")
    if failures:
        click.echo(f"{failures} image(s) failed; see log", err=True)
        sys.exit(1)


@main.command()
@click.option("--captions", "captions_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--format", "split_format", default="jsonl", type=click.Choice(["jsonl", "karpathy-json"]))
@click.option("--which", default=",".join(pipeline.ALL_METRICS), help="comma-separated metric families")
@click.option("--phi", default=0.1, type=float)
@click.option("--vectors", "vectors_path", default=None, type=click.Path(exists=True))
@click.option("--table", "table_style", default=None, type=click.Choice(["recall"]))
@click.option("--label", default="run")
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
def evaluate(captions_path, split_path, split_format, which, phi, vectors_path,
             table_style, label, out_dir, cache_dir):
    """Score a captions file: recall, coverage, n-gram, diversity, LLOP, length."""
    split = load_split(split_path, format=split_format)
    rows = pipeline.load_captions(captions_path)
    which_set = [w for w in which.split(",") if w]
    gateway = ModelGateway.from_env(cache_dir=cache_dir)
    report = pipeline.evaluate(
        rows, split, gateway, which=which_set, phi=phi, vectors_path=vectors_path
    )
    out_base = Path(out_dir) if out_dir else Path(captions_path).parent
    out_base.mkdir(parents=True, exist_ok=True)
    (out_base / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    (out_base / "report.md").write_text(pipeline.report_markdown(report, label))
    if table_style == "recall":
        click.echo(pipeline.recall_table_md(report, label))
    else:
        click.echo(f"report written to {out_base}")


@main.command("build-hard-split")
@click.option("--captions", "captions_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--n", default=200, type=int)
@click.option("--model-name", default="model", help="used in the default output name")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
def build_hard_split_cmd(captions_path, split_path, n, model_name, out_path, cache_dir):
    """Select the n images the captioner ranks worst and write them as a split."""
    from capcommittee.recall import build_hard_split, recall_stats, score_matrix

    split = load_split(split_path)
    rows = pipeline.load_captions(captions_path)
    gateway = ModelGateway.from_env(cache_dir=cache_dir)
    ids = [r["image_id"] for r in rows]
    image_uris = [split.by_id(i).image_uri for i in ids]
    texts = [r["baseline"] for r in rows]
    image_vecs = [v.values for v in gateway.embed(image_uris, "image")]
    text_vecs = [v.values for v in gateway.embed(texts, "text")]
    report = recall_stats(score_matrix(ids, image_vecs, text_vecs))
    hard = build_hard_split(report, split, n=n)
    out = Path(out_path) if out_path else Path(f"hard-mrr-{model_name}.jsonl")
    save_split(hard, out)
    click.echo(f"wrote {len(hard)} records to {out}")


@main.command()
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--grid", default=None, help="comma-separated temperatures")
@click.option("--samples", default=10, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_base", default="sweep", type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
def calibrate(split_path, grid, samples, seed, out_base, cache_dir):
    """Temperature sweep: distance between sampled and reference caption pools."""
    split = load_split(split_path)
    spec_kwargs = {"samples_per_point": samples, "seed": seed}
    if grid:
        spec_kwargs["grid"] = tuple(float(t) for t in grid.split(","))
    spec = SweepSpec(**spec_kwargs)
    gateway = ModelGateway.from_env(cache_dir=cache_dir)
    result = calibrate_temperature(split, spec, gateway)
    csv_path = Path(f"{out_base}.csv")
    with csv_path.open("w") as fh:
        fh.write("t,distance\n")
        for t, d in result["curve"]:
            fh.write(f"{t},{d}\n")
    Path(f"{out_base}.json").write_text(
        json.dumps({"best_t": result["best_t"], "curve": result["curve"]}, indent=2) + "\n"
    )
    click.echo(f"best_t = {result['best_t']}")


@main.command()
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", default="study-events.jsonl", type=click.Path())
@click.option("--static-dir", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8080, type=int)
@click.option("--tau", default=0.5, type=float)
def serve(pool_path, log_path, static_dir, host, port, tau):
    """Run the human-rating service until terminated; state survives restarts
    via the append-only event log."""
    import uvicorn

    from capcommittee.humaneval.service import Study, create_app
    from capcommittee.humaneval.store import CorruptLogError, EventLog

    pool = []
    with Path(pool_path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                pool.append(json.loads(line))
    try:
        study = Study(pool, EventLog(log_path), tau=tau)
    except CorruptLogError as exc:
        click.echo(f"refusing to start: corrupt event log: {exc}", err=True)
        sys.exit(1)
    app = create_app(study, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
