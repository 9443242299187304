"""Run orchestration: generate captions for a split, evaluate caption files,
and write deterministic report bundles under ``runs/<run_id>/``.

A run's manifest is written before the first model call and contains only
the config snapshot and dataset fingerprint, so rerunning with a warm cache
reproduces every artifact byte for byte. Volatile cost totals go to a
separate ``costs.json``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from capcommittee import __version__
from capcommittee.coverage import (
    EmbeddingTable,
    RuleAnnotator,
    coverage_report,
    length_stats,
    llop,
)
from capcommittee.data import DatasetSplit
from capcommittee.gateway import ModelGateway
from capcommittee.ngram import CorpusError, bleu4, cider, pearson_r, rouge_l, self_bleu
from capcommittee.prompts import GuardConfig, PromptVariant, summarize
from capcommittee.recall import RecallReport, recall_stats, score_matrix

log = logging.getLogger("capcommittee")

# Calibrated sampling temperatures per captioner family.
CAPTIONER_TEMPERATURES = {"blip": 1.15, "ofa": 0.95}

ALL_METRICS = ("recall", "coverage", "ngram", "diversity", "llop", "length")


@dataclass(frozen=True)
class RunConfig:
    split_path: str
    model: str = "mock"
    captioner: str = "blip"
    k: int = 10
    temperature: Optional[float] = None
    beams: int = 16
    seed: int = 0
    phi: float = 0.1
    source: str = "captioner"  # or "references"
    variant: PromptVariant = PromptVariant()
    guard: GuardConfig = GuardConfig()

    def effective_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return CAPTIONER_TEMPERATURES.get(self.captioner, 1.0)


def _fingerprint(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def make_run_id(config: RunConfig, dataset_fingerprint: str) -> str:
    blob = json.dumps(
        {"config": _config_obj(config), "dataset": dataset_fingerprint},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _config_obj(config: RunConfig) -> dict:
    obj = asdict(config)
    obj["temperature"] = config.effective_temperature()
    return obj


def write_manifest(run_dir: Path, config: RunConfig, dataset_fingerprint: str, run_id: str) -> None:
    _dump_json(
        run_dir / "manifest.json",
        {
            "run_id": run_id,
            "tool_version": __version__,
            "dataset_fingerprint": dataset_fingerprint,
            "config": _config_obj(config),
        },
    )


def generate(
    split: DatasetSplit,
    config: RunConfig,
    gateway: ModelGateway,
    run_dir: Path,
) -> int:
    """Write one captions.jsonl row per image: baseline caption, candidate
    set, summary, and guard flags. Returns the number of hard failures."""
    run_dir.mkdir(parents=True, exist_ok=True)
    temperature = config.effective_temperature()
    failures = 0
    rows = []
    for rec in split:
        try:
            baseline = gateway.baseline_caption(rec, beams=config.beams, seed=config.seed)
            if config.source == "references":
                from capcommittee.data import CandidateSet, Caption, GenParams

                params = GenParams(temperature=temperature, seed=config.seed)
                candidates = CandidateSet(
                    image_id=rec.image_id,
                    captions=tuple(
                        Caption(text=t, source="sampled", gen_params=params)
                        for t in rec.references
                    ),
                    temperature=temperature,
                    k=len(rec.references),
                )
            else:
                candidates = gateway.sample_candidates(
                    rec, k=config.k, temperature=temperature, seed=config.seed
                )
            summary = summarize(
                candidates,
                gateway,
                model=config.model,
                variant=config.variant,
                guard=config.guard,
                seed=config.seed,
            )
            rows.append(
                {
                    "image_id": rec.image_id,
                    "baseline": baseline.text,
                    "candidates": candidates.texts(),
                    "summary": summary.summary_text,
                    "flags": {
                        **summary.flags(),
                        "guard_retries": summary.guard_retries,
                    },
                }
            )
        except Exception:
            log.exception("image %s failed; skipping", rec.image_id)
            failures += 1
    with (run_dir / "captions.jsonl").open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    _dump_json(run_dir / "costs.json", gateway.ledger.summary())
    return failures


def load_captions(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return sorted(rows, key=lambda r: r["image_id"])


def evaluate(
    rows: Sequence[dict],
    split: DatasetSplit,
    gateway: Optional[ModelGateway],
    which: Sequence[str] = ALL_METRICS,
    phi: float = 0.1,
    vectors_path: Optional[str] = None,
) -> dict:
    """Compute the requested metric families over a captions file.

    Report assembly is deterministic: rows are consumed sorted by image_id.
    Recall metrics are skipped with a notice when no embedder is available.
    """
    rows = sorted(rows, key=lambda r: r["image_id"])
    ids = [r["image_id"] for r in rows]
    summaries = [r["summary"] for r in rows]
    references = [split.by_id(i).references for i in ids]
    report: dict = {"n_images": len(rows), "metrics": {}}
    notices: list[str] = []

    recall_report: Optional[RecallReport] = None
    if "recall" in which:
        if gateway is None or gateway.embedder_cfg is None:
            notices.append("recall metrics skipped: no embedder endpoint configured")
        else:
            image_uris = [split.by_id(i).image_uri for i in ids]
            image_vecs = [v.values for v in gateway.embed(image_uris, "image")]
            text_vecs = [v.values for v in gateway.embed(summaries, "text")]
            recall_report = recall_stats(score_matrix(ids, image_vecs, text_vecs))
            report["metrics"]["recall"] = recall_report.to_json_obj()

    if "coverage" in which:
        table = EmbeddingTable.load(vectors_path) if vectors_path else EmbeddingTable({})
        if not vectors_path:
            notices.append(
                "coverage: no vectors file; fuzzy overlap falls back to exact string match"
            )
        cov = coverage_report(
            summaries, references, RuleAnnotator(), table, phi=phi, image_ids=ids
        )
        report["metrics"]["coverage"] = cov.to_json_obj()

    if "ngram" in which:
        try:
            cider_score = cider(summaries, references)
        except CorpusError:
            cider_score = None
            notices.append("ngram: corpus too small for CIDEr")
        report["metrics"]["ngram"] = {
            "bleu4": sum(bleu4(s, r) for s, r in zip(summaries, references)) / len(rows),
            "rouge_l": sum(rouge_l(s, r) for s, r in zip(summaries, references)) / len(rows),
            "cider": cider_score,
            "meteor": None,
            "mauve": None,
        }
        notices.append("ngram: METEOR and MAUVE are out of scope; emitted as null")

    if "diversity" in which:
        per_image_selfbleu = []
        for row in rows:
            cands = row.get("candidates", [])
            per_image_selfbleu.append(self_bleu(cands) if len(cands) >= 2 else None)
        valid = [s for s in per_image_selfbleu if s is not None]
        diversity = {
            "mean_self_bleu": sum(valid) / len(valid) if valid else None,
        }
        if recall_report is not None and valid:
            pairs = [
                (s, 1.0 / rank)
                for s, rank in zip(per_image_selfbleu, recall_report.per_image_rank)
                if s is not None
            ]
            try:
                diversity["pearson_selfbleu_vs_rr"] = pearson_r(
                    [p[0] for p in pairs], [p[1] for p in pairs]
                )
            except CorpusError:
                diversity["pearson_selfbleu_vs_rr"] = None
        report["metrics"]["diversity"] = diversity

    if "llop" in which:
        candidate_pool = [c for row in rows for c in row.get("candidates", [])]
        report["metrics"]["llop"] = {
            "summaries": llop(summaries),
            "candidates": llop(candidate_pool) if candidate_pool else None,
        }

    if "length" in which:
        report["metrics"]["length"] = length_stats(summaries)

    report["notices"] = notices
    return report


def recall_table_md(report: dict, label: str = "run") -> str:
    """Markdown rows in the recall-table column order (MRR, R@1, R@5, R@10)."""
    lines = ["| Model | MRR | R@1 | R@5 | R@10 |", "| --- | --- | --- | --- | --- |"]
    recall = report.get("metrics", {}).get("recall")
    if recall:
        r = recall["r_at"]
        lines.append(
            f"| {label} | {recall['mrr']:.3f} | {r['1']:.3f} | {r['5']:.3f} | {r['10']:.3f} |"
        )
    else:
        lines.append(f"| {label} | - | - | - | - |")
    return "\n".join(lines) + "\n"


def report_markdown(report: dict, label: str = "run") -> str:
    parts = [f"# Evaluation report: {label}\n", recall_table_md(report, label)]
    metrics = report.get("metrics", {})
    if "coverage" in metrics:
        c = metrics["coverage"]
        parts.append(
            "\n| Model | Exact N | Exact V | Fuzzy N | Fuzzy V |\n| --- | --- | --- | --- | --- |\n"
            f"| {label} | {c['noun_exact']:.3f} | {c['verb_exact']:.3f} "
            f"| {c['noun_fuzzy']:.3f} | {c['verb_fuzzy']:.3f} |\n"
        )
    if "ngram" in metrics:
        g = metrics["ngram"]
        cider_cell = f"{g['cider']:.3f}" if g["cider"] is not None else "null"
        parts.append(
            "\n| Model | BLEU@4 | CIDEr | ROUGE-L | MAUVE |\n| --- | --- | --- | --- | --- |\n"
            f"| {label} | {g['bleu4']:.3f} | {cider_cell} | {g['rouge_l']:.3f} | null |\n"
        )
    if report.get("notices"):
        parts.append("\nNotes:\n" + "".join(f"- {n}\n" for n in report["notices"]))
    return "".join(parts)
