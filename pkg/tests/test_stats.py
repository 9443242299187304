"""t-tests for head-to-head and mean-opinion-score comparisons, checked
against scipy's reference implementations."""

import random

import pytest
from scipy import stats as scipy_stats

from capcommittee.humaneval.stats import (
    H2HJudgment,
    InsufficientDataError,
    h2h_test,
    mos_test,
    one_sample_t_one_sided,
    welch_t_one_sided,
)


def test_one_sample_fixture():
    # mean 0.5, sd 1, n 4 gives t = 1 with 3 degrees of freedom
    t, p = one_sample_t_one_sided([1.0, 1.0, 1.0, -1.0])
    assert t == pytest.approx(1.0)
    assert p == pytest.approx(0.19550, abs=1e-3)


def test_all_zero_input_is_exactly_null():
    assert one_sample_t_one_sided([0.0, 0.0, 0.0]) == (0.0, 0.5)
    assert welch_t_one_sided([2.0, 2.0], [2.0, 2.0]) == (0.0, 0.5)


def test_zero_variance_nonzero_mean():
    t, p = one_sample_t_one_sided([1.0, 1.0, 1.0])
    assert t == float("inf") and p == 0.0
    t, p = one_sample_t_one_sided([-1.0, -1.0])
    assert t == float("-inf") and p == 1.0


def test_minimum_sample_sizes():
    with pytest.raises(InsufficientDataError):
        one_sample_t_one_sided([1.0])
    with pytest.raises(InsufficientDataError):
        welch_t_one_sided([1.0], [1.0, 2.0])


def test_one_sample_matches_scipy_on_random_data():
    rng = random.Random(13)
    for _ in range(100):
        n = rng.randint(3, 30)
        xs = [rng.gauss(rng.uniform(-1, 1), rng.uniform(0.5, 2)) for _ in range(n)]
        t, p = one_sample_t_one_sided(xs)
        ref = scipy_stats.ttest_1samp(xs, 0.0, alternative="greater")
        assert t == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


def test_welch_matches_scipy_on_random_data():
    rng = random.Random(29)
    for _ in range(100):
        a = [rng.gauss(0.3, 1.0) for _ in range(rng.randint(3, 25))]
        b = [rng.gauss(0.0, 1.5) for _ in range(rng.randint(3, 25))]
        t, p = welch_t_one_sided(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False, alternative="greater")
        assert t == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


def _judgment(rater, winner):
    return H2HJudgment(rater_id=rater, model_a="m", model_b="base", winner=winner)


def test_h2h_aggregates_per_rater():
    judgments = [
        _judgment("r1", "m"),
        _judgment("r1", "m"),
        _judgment("r1", None),
        _judgment("r2", "m"),
        _judgment("r2", "base"),
        _judgment("r3", "m"),
    ]
    out = h2h_test(judgments, ("m", "base"))
    assert out["n_judgments"] == 6
    assert out["n_raters"] == 3
    assert out["win_pct_a"] == pytest.approx(4 / 6)
    assert out["win_pct_b"] == pytest.approx(1 / 6)
    assert out["tie_pct"] == pytest.approx(1 / 6)
    # rater means are 2/3, 0, 1
    ref_t, ref_p = one_sample_t_one_sided([2 / 3, 0.0, 1.0])
    assert out["t"] == pytest.approx(ref_t)
    assert out["p_value"] == pytest.approx(ref_p)


def test_h2h_null_judgments_give_half():
    judgments = [_judgment("r1", None), _judgment("r2", None)]
    out = h2h_test(judgments, ("m", "base"))
    assert out["p_value"] == 0.5
    assert out["tie_pct"] == 1.0


def test_h2h_requires_two_raters_and_matching_pair():
    with pytest.raises(InsufficientDataError):
        h2h_test([_judgment("r1", "m")], ("m", "base"))
    with pytest.raises(InsufficientDataError):
        h2h_test([_judgment("r1", "m")], ("x", "y"))


def test_h2h_pair_order_does_not_matter():
    judgments = [
        _judgment("r1", "m"),
        _judgment("r2", "base"),
        _judgment("r2", "m"),
    ]
    fwd = h2h_test(judgments, ("m", "base"))
    rev = h2h_test(judgments, ("base", "m"))
    assert fwd["win_pct_a"] == rev["win_pct_b"]
    assert fwd["t"] == pytest.approx(-rev["t"])


def test_mos_test_reports_means():
    out = mos_test([4.0, 3.5, 4.5, 4.0], [3.0, 2.5, 3.5, 3.0])
    assert out["mean_model"] == pytest.approx(4.0)
    assert out["mean_baseline"] == pytest.approx(3.0)
    assert out["p_value"] < 0.05
