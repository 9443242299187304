"""Statistical analysis of the rating study.

Head-to-head judgments are aggregated per rater (+1 win / -1 loss / 0 tie)
and tested with a one-sided one-sample t-test against zero. Mean-opinion
scores use a one-sided Welch two-sample t-test (model > baseline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from scipy import stats as _scipy_stats


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class H2HJudgment:
    rater_id: str
    model_a: str
    model_b: str
    winner: Optional[str]  # winning model id, or None for an explicit tie


def one_sample_t_one_sided(values: Sequence[float]) -> tuple[float, float]:
    """t statistic and one-sided p (alternative: mean > 0).

    All-zero input gives t = 0, p = 0.5 exactly.
    """
    n = len(values)
    if n < 2:
        raise InsufficientDataError("need at least 2 samples")
    mean = sum(values) / n
    var = sum((x - mean) ** 2 for x in values) / (n - 1)
    if var == 0:
        if mean == 0:
            return 0.0, 0.5
        return math.copysign(math.inf, mean), 0.0 if mean > 0 else 1.0
    t = mean / math.sqrt(var / n)
    p = float(_scipy_stats.t.sf(t, df=n - 1))
    return t, p


def welch_t_one_sided(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch t statistic and one-sided p (alternative: mean(a) > mean(b))."""
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("both groups need at least 2 samples")
    na, nb = len(a), len(b)
    ma = sum(a) / na
    mb = sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se_sq = va / na + vb / nb
    if se_sq == 0:
        if ma == mb:
            return 0.0, 0.5
        return math.copysign(math.inf, ma - mb), 0.0 if ma > mb else 1.0
    t = (ma - mb) / math.sqrt(se_sq)
    df = se_sq**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = float(_scipy_stats.t.sf(t, df=df))
    return t, p


def h2h_test(judgments: Sequence[H2HJudgment], model_pair: tuple[str, str]) -> dict:
    """Win/loss/tie percentages and the per-rater one-sample t-test for one
    model pair. Requires judgments from at least 2 raters."""
    a, b = model_pair
    relevant = [j for j in judgments if {j.model_a, j.model_b} == {a, b}]
    if not relevant:
        raise InsufficientDataError(f"no judgments for pair ({a!r}, {b!r})")

    per_rater: dict[str, list[float]] = {}
    wins_a = wins_b = ties = 0
    for j in relevant:
        if j.winner is None:
            score = 0.0
            ties += 1
        elif j.winner == a:
            score = 1.0
            wins_a += 1
        elif j.winner == b:
            score = -1.0
            wins_b += 1
        else:
            raise ValueError(f"winner {j.winner!r} not in pair ({a!r}, {b!r})")
        per_rater.setdefault(j.rater_id, []).append(score)

    if len(per_rater) < 2:
        raise InsufficientDataError("need judgments from at least 2 raters")
    rater_means = [sum(v) / len(v) for _, v in sorted(per_rater.items())]
    t, p = one_sample_t_one_sided(rater_means)
    n = len(relevant)
    return {
        "model_a": a,
        "model_b": b,
        "win_pct_a": wins_a / n,
        "win_pct_b": wins_b / n,
        "tie_pct": ties / n,
        "n_judgments": n,
        "n_raters": len(per_rater),
        "t": t,
        "p_value": p,
    }


def mos_test(
    scores_model: Sequence[float], scores_baseline: Sequence[float]
) -> dict:
    """One-sided Welch test that the model's per-rater MOS means exceed the
    baseline's; also reports the group means (the table cells)."""
    t, p = welch_t_one_sided(scores_model, scores_baseline)
    return {
        "mean_model": sum(scores_model) / len(scores_model),
        "mean_baseline": sum(scores_baseline) / len(scores_baseline),
        "t": t,
        "p_value": p,
    }
