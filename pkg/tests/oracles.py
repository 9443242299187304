"""Independent reference implementations used only as test oracles.

These deliberately share nothing with the package implementations beyond the
pinned tokenizer (tokenization itself is a convention, not a metric), so
agreement is a genuine cross-check of the metric logic.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from capcommittee.ngram import BLEU_EPS, CIDER_SIGMA, ROUGE_BETA, tokenize


def _grams(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def ref_bleu4(candidate: str, references: list[str]) -> float:
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    if not cand:
        return 0.0
    precisions = []
    for n in (1, 2, 3, 4):
        cand_grams = _grams(cand, n)
        if not cand_grams:
            # order skipped entirely when the candidate is too short
            continue
        matched = 0
        remaining = [list(_grams(r, n)) for r in refs]
        # clip by consuming reference occurrences, one per candidate match
        budgets = {}
        for gram in set(cand_grams):
            budgets[gram] = max(r.count(gram) for r in remaining)
        for gram in cand_grams:
            if budgets.get(gram, 0) > 0:
                budgets[gram] -= 1
                matched += 1
        precisions.append(matched / len(cand_grams) if matched else BLEU_EPS)
    if not precisions:
        return 0.0
    geo = math.exp(sum(math.log(p) for p in precisions) / len(precisions))
    closest = min(refs, key=lambda r: (abs(len(r) - len(cand)), len(r)))
    bp = 1.0 if len(cand) >= len(closest) else math.exp(1 - len(closest) / len(cand))
    return bp * geo


def ref_rouge_l(candidate: str, references: list[str]) -> float:
    cand = tuple(tokenize(candidate))
    best = 0.0
    for reference in references:
        ref = tuple(tokenize(reference))

        @lru_cache(maxsize=None)
        def lcs(i: int, j: int) -> int:
            if i == 0 or j == 0:
                return 0
            if cand[i - 1] == ref[j - 1]:
                return lcs(i - 1, j - 1) + 1
            return max(lcs(i - 1, j), lcs(i, j - 1))

        if not cand or not ref:
            continue
        ell = lcs(len(cand), len(ref))
        lcs.cache_clear()
        if ell == 0:
            continue
        p = ell / len(cand)
        r = ell / len(ref)
        b2 = ROUGE_BETA**2
        best = max(best, (1 + b2) * p * r / (r + b2 * p))
    return best


def ref_cider(candidates: list[str], references: list[list[str]]) -> float:
    """Vectorized CIDEr-D over an explicit gram vocabulary."""
    n_images = len(candidates)
    cand_tok = [tokenize(c) for c in candidates]
    ref_tok = [[tokenize(r) for r in refs] for refs in references]
    score_total = 0.0
    for n in (1, 2, 3, 4):
        vocab = {}
        for refs in ref_tok:
            for ref in refs:
                for gram in _grams(ref, n):
                    vocab.setdefault(gram, len(vocab))
        for cand in cand_tok:
            for gram in _grams(cand, n):
                vocab.setdefault(gram, len(vocab))
        df = np.zeros(len(vocab))
        for refs in ref_tok:
            seen = set()
            for ref in refs:
                seen.update(_grams(ref, n))
            for gram in seen:
                df[vocab[gram]] += 1
        idf = np.maximum(math.log(n_images) - np.log(np.maximum(df, 1.0)), 0.0)

        def tfidf(tokens):
            grams = _grams(tokens, n)
            vec = np.zeros(len(vocab))
            for gram in grams:
                vec[vocab[gram]] += 1
            if grams:
                vec /= len(grams)
            return vec * idf

        for cand, refs in zip(cand_tok, ref_tok):
            c_vec = tfidf(cand)
            c_norm = np.linalg.norm(c_vec)
            if c_norm == 0:
                continue
            acc = 0.0
            for ref in refs:
                r_vec = tfidf(ref)
                r_norm = np.linalg.norm(r_vec)
                if r_norm == 0:
                    continue
                penalty = math.exp(-((len(cand) - len(ref)) ** 2) / (2 * CIDER_SIGMA**2))
                acc += penalty * float(np.minimum(c_vec, r_vec) @ r_vec) / (c_norm * r_norm)
            score_total += 10.0 * acc / max(len(refs), 1) / 4.0
    return score_total / n_images


def ref_self_bleu(captions: list[str]) -> float:
    scores = [
        ref_bleu4(cap, [c for j, c in enumerate(captions) if j != i])
        for i, cap in enumerate(captions)
    ]
    return sum(scores) / len(scores)


def ref_rank(row, diag_index: int) -> int:
    """Pessimistic retrieval rank via explicit sorting."""
    diag = row[diag_index]
    ordered = sorted(row, reverse=True)
    # place the diagonal after every tie
    rank = 0
    for value in ordered:
        rank += 1
        if value < diag:
            return rank - 1
    return rank


def ref_recall(matrix) -> tuple[list[int], float, dict]:
    ranks = [ref_rank(list(row), i) for i, row in enumerate(matrix)]
    mrr = sum(1.0 / r for r in ranks) / len(ranks)
    r_at = {k: sum(1 for r in ranks if r <= k) / len(ranks) for k in (1, 5, 10)}
    return ranks, mrr, r_at
