"""Sampling-temperature sweep and candidate-count (k) ablation runners.

The bundled distribution distance is Jensen-Shannon divergence over pooled
1-2-gram frequency distributions (sampled captions vs references), a proxy
for heavier distribution metrics; any callable with the same signature can
be plugged in instead.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from capcommittee.coverage import RuleAnnotator, annotate, exact_overlap
from capcommittee.data import DatasetSplit
from capcommittee.gateway import ModelGateway
from capcommittee.ngram import ngram_counts, tokenize
from capcommittee.prompts import GuardConfig, PromptVariant, summarize
from capcommittee.recall import recall_stats, score_matrix

DistanceMetric = Callable[[Sequence[str], Sequence[str]], float]

DEFAULT_GRID = [round(0.2 + 0.15 * i, 2) for i in range(13)]  # 0.2 .. 2.0


@dataclass(frozen=True)
class SweepSpec:
    grid: tuple[float, ...] = tuple(DEFAULT_GRID)
    samples_per_point: int = 10
    seed: int = 0
    metric: Optional[DistanceMetric] = None

    def __post_init__(self):
        if self.samples_per_point < 1:
            raise ValueError("samples_per_point must be >= 1")
        if list(self.grid) != sorted(set(self.grid)):
            raise ValueError("grid must be strictly increasing")
        if self.grid[0] < 0 or self.grid[-1] > 2:
            raise ValueError("grid must lie within [0, 2]")


def _pooled_distribution(pool: Sequence[str]) -> dict:
    counts: Counter = Counter()
    for text in pool:
        tokens = tokenize(text)
        counts.update(ngram_counts(tokens, 1))
        counts.update(ngram_counts(tokens, 2))
    total = sum(counts.values())
    return {gram: c / total for gram, c in counts.items()} if total else {}


def js_divergence(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Jensen-Shannon divergence (base 2, in [0, 1]) between pooled 1-2-gram
    distributions."""
    p = _pooled_distribution(candidates)
    q = _pooled_distribution(references)
    if not p or not q:
        return 1.0
    div = 0.0
    for gram in set(p) | set(q):
        pi = p.get(gram, 0.0)
        qi = q.get(gram, 0.0)
        mi = (pi + qi) / 2.0
        if pi > 0:
            div += 0.5 * pi * math.log2(pi / mi)
        if qi > 0:
            div += 0.5 * qi * math.log2(qi / mi)
    return div


def calibrate_temperature(
    split: DatasetSplit, spec: SweepSpec, gateway: ModelGateway
) -> dict:
    """Sample the split at each grid temperature and score the candidate pool
    against the reference pool; best_t is the argmin (ties go to the lower
    temperature)."""
    metric = spec.metric or js_divergence
    reference_pool = [ref for rec in split for ref in rec.references]
    curve = []
    for t in spec.grid:
        candidate_pool = []
        for rec in split:
            candidates = gateway.sample_candidates(
                rec, k=spec.samples_per_point, temperature=t, seed=spec.seed
            )
            candidate_pool.extend(candidates.texts())
        curve.append((t, metric(candidate_pool, reference_pool)))
    best_t = min(curve, key=lambda pair: (pair[1], pair[0]))[0]
    return {"best_t": best_t, "curve": curve}


def k_ablation(
    split: DatasetSplit,
    k_grid: Sequence[int],
    gateway: ModelGateway,
    model: str,
    temperature: float = 1.15,
    variant: PromptVariant = PromptVariant(),
    guard: GuardConfig = GuardConfig(),
    seed: int = 0,
) -> list[dict]:
    """Run the sample-then-summarize pipeline at each k and tabulate recall,
    exact noun/verb coverage, and mean per-image LLM cost."""
    if list(k_grid) != sorted(k_grid) or any(k < 1 for k in k_grid):
        raise ValueError("k_grid must be positive and ascending")
    annotator = RuleAnnotator()
    rows = []
    for k in k_grid:
        cost_before = gateway.ledger.total_cost
        summaries = []
        for rec in split:
            candidates = gateway.sample_candidates(rec, k=k, temperature=temperature, seed=seed)
            result = summarize(
                candidates, gateway, model=model, variant=variant, guard=guard, seed=seed
            )
            summaries.append(result.summary_text)

        image_vecs = [v.values for v in gateway.embed([r.image_uri for r in split], "image")]
        text_vecs = [v.values for v in gateway.embed(summaries, "text")]
        report = recall_stats(score_matrix(split.ids(), image_vecs, text_vecs))

        noun_scores, verb_scores = [], []
        for rec, summary in zip(split, summaries):
            cand = annotate(summary, annotator)
            refs = [annotate(r, annotator) for r in rec.references]
            noun, verb = exact_overlap(cand, refs)
            if noun is not None:
                noun_scores.append(noun)
            if verb is not None:
                verb_scores.append(verb)

        rows.append(
            {
                "k": k,
                "mrr": report.mrr,
                "noun_recall": sum(noun_scores) / len(noun_scores) if noun_scores else 0.0,
                "verb_recall": sum(verb_scores) / len(verb_scores) if verb_scores else 0.0,
                "mean_cost": (gateway.ledger.total_cost - cost_before) / len(split),
            }
        )
    return rows
