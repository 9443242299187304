"""Reference-based n-gram metrics: BLEU@4, ROUGE-L, CIDEr-D, and Self-BLEU.

All metrics share one pinned tokenizer (lowercase, punctuation stripped except
intra-word hyphens, whitespace split) so scores are comparable across runs.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Sequence

BLEU_EPS = 1e-12  # substituted for zero clipped-match counts (add-epsilon smoothing)
ROUGE_BETA = 1.2  # recall weight of the LCS F-measure, caption-eval convention
CIDER_SIGMA = 6.0  # gaussian length-penalty width

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


class CorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word tokens, keeping intra-word hyphens."""
    return _TOKEN_RE.findall(text.lower())


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, references: Sequence[str]) -> float:
    """Sentence BLEU with uniform 1/4 weights, clipped counts, and brevity penalty.

    Zero clipped-match counts are smoothed to BLEU_EPS so disjoint inputs score
    near (not exactly) zero rather than crashing the geometric mean.
    """
    if not references:
        raise CorpusError("references must be non-empty")
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    if not cand:
        return 0.0

    # orders the candidate is too short to produce are skipped and the
    # uniform weights renormalized, so an exact copy scores exactly 1.0
    log_precisions = []
    for n in range(1, 5):
        cand_counts = ngram_counts(cand, n)
        total = sum(cand_counts.values())
        if total == 0:
            continue
        max_ref = Counter()
        for ref in refs:
            for gram, count in ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        p_n = clipped / total if clipped > 0 else BLEU_EPS
        log_precisions.append(math.log(p_n))
    if not log_precisions:
        return 0.0

    # closest reference length for the brevity penalty
    ref_len = min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
    bp = 1.0 if len(cand) >= ref_len else math.exp(1.0 - ref_len / len(cand))
    return bp * math.exp(sum(log_precisions) / len(log_precisions))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """LCS-based F-measure (beta=1.2), max over references."""
    if not references:
        raise CorpusError("references must be non-empty")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    best = 0.0
    for reference in references:
        ref = tokenize(reference)
        if not ref:
            continue
        lcs = _lcs_length(cand, ref)
        if lcs == 0:
            continue
        prec = lcs / len(cand)
        rec = lcs / len(ref)
        beta2 = ROUGE_BETA**2
        score = (1 + beta2) * prec * rec / (rec + beta2 * prec)
        best = max(best, score)
    return best


def _cider_vector(counts: Counter, doc_freq: Counter, log_n_images: float):
    """tf-idf vector (dict), its norm, and token length for one n-gram order."""
    vec = {}
    total = sum(counts.values())
    for gram, count in counts.items():
        df = math.log(max(doc_freq[gram], 1.0))
        vec[gram] = (count / total) * max(log_n_images - df, 0.0)
    norm = math.sqrt(sum(v * v for v in vec.values()))
    return vec, norm


def cider(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus-level CIDEr-D over 1..4-grams with sigma=6 length penalty.

    ``candidates[i]`` is scored against ``references[i]``; idf statistics come
    from the whole reference corpus.
    """
    if len(candidates) != len(references):
        raise CorpusError("candidates and references must align")
    if len(candidates) < 2:
        raise CorpusError("CIDEr needs a corpus of at least 2 images")

    cand_tokens = [tokenize(c) for c in candidates]
    ref_tokens = [[tokenize(r) for r in refs] for refs in references]

    log_n = math.log(len(candidates))
    doc_freqs = []
    for n in range(1, 5):
        df = Counter()
        for refs in ref_tokens:
            grams = set()
            for ref in refs:
                grams.update(ngram_counts(ref, n))
            df.update(grams)
        doc_freqs.append(df)

    total_score = 0.0
    for cand, refs in zip(cand_tokens, ref_tokens):
        image_score = 0.0
        for n in range(1, 5):
            df = doc_freqs[n - 1]
            c_counts = ngram_counts(cand, n)
            if not c_counts:
                continue
            c_vec, c_norm = _cider_vector(c_counts, df, log_n)
            acc = 0.0
            for ref in refs:
                r_counts = ngram_counts(ref, n)
                r_vec, r_norm = _cider_vector(r_counts, df, log_n)
                if c_norm == 0 or r_norm == 0:
                    continue
                # candidate tf-idf clipped to the reference's (CIDEr-D)
                dot = sum(
                    min(c_vec[g], r_vec[g]) * r_vec[g] for g in c_vec if g in r_vec
                )
                length_penalty = math.exp(
                    -((len(cand) - len(ref)) ** 2) / (2 * CIDER_SIGMA**2)
                )
                acc += length_penalty * dot / (c_norm * r_norm)
            image_score += 10.0 * acc / max(len(refs), 1)
        total_score += image_score / 4.0
    return total_score / len(candidates)


def self_bleu(captions: Sequence[str]) -> float:
    """Mean BLEU@4 of each caption against the rest; lower means more diverse."""
    if len(captions) < 2:
        raise CorpusError("self_bleu needs at least 2 captions")
    scores = []
    for i, cap in enumerate(captions):
        others = list(captions[:i]) + list(captions[i + 1 :])
        scores.append(bleu4(cap, others))
    return sum(scores) / len(scores)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise CorpusError("pearson_r needs two equal-length lists of size >= 2")
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise CorpusError("pearson_r undefined for zero-variance input")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)
