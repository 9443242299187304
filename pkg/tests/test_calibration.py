"""Temperature sweep and k-ablation runners."""

import math

import pytest

from capcommittee.calibration import (
    DEFAULT_GRID,
    SweepSpec,
    calibrate_temperature,
    js_divergence,
    k_ablation,
)


def test_default_grid_spans_up_to_two():
    assert DEFAULT_GRID[0] == 0.2
    assert DEFAULT_GRID[-1] == 2.0
    assert len(DEFAULT_GRID) == 13
    steps = [round(b - a, 2) for a, b in zip(DEFAULT_GRID, DEFAULT_GRID[1:])]
    assert set(steps) == {0.15}


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(grid=(0.5, 0.5))
    with pytest.raises(ValueError):
        SweepSpec(grid=(0.9, 0.3))
    with pytest.raises(ValueError):
        SweepSpec(grid=(0.2, 2.5))
    with pytest.raises(ValueError):
        SweepSpec(samples_per_point=0)


def test_js_divergence_basics():
    assert js_divergence(["a dog runs"], ["a dog runs"]) == pytest.approx(0.0)
    disjoint = js_divergence(["alpha beta"], ["gamma delta"])
    assert disjoint == pytest.approx(1.0)
    partial = js_divergence(["a dog runs"], ["a cat runs"])
    assert 0.0 < partial < 1.0
    # symmetric by construction
    assert js_divergence(["a cat runs"], ["a dog runs"]) == pytest.approx(partial)
    assert js_divergence([], ["a dog"]) == 1.0


def test_calibrate_finds_planted_optimum(sample_split, gateway):
    # the mock captioner is deterministic per payload, so record the sweep
    # temperature as each point is sampled and plant a parabolic optimum
    seen = {}

    def metric(cands, refs):
        return seen.pop("t")

    orig = gateway.sample_candidates

    def spying(rec, k, temperature, seed=0):
        seen["t"] = (1.15 - temperature) ** 2
        return orig(rec, k=k, temperature=temperature, seed=seed)

    gateway.sample_candidates = spying
    spec = SweepSpec(grid=(0.2, 0.95, 1.15, 1.7), samples_per_point=2, metric=metric)
    out = calibrate_temperature(sample_split, spec, gateway)
    assert out["best_t"] == 1.15
    assert [t for t, _ in out["curve"]] == [0.2, 0.95, 1.15, 1.7]
    assert out["curve"][2][1] == 0.0


def test_calibrate_tie_breaks_to_lower_temperature(sample_split, gateway):
    spec = SweepSpec(grid=(0.5, 0.8, 1.1), samples_per_point=1, metric=lambda c, r: 0.7)
    out = calibrate_temperature(sample_split, spec, gateway)
    assert out["best_t"] == 0.5


def test_calibrate_single_point_grid(sample_split, gateway):
    spec = SweepSpec(grid=(1.15,), samples_per_point=1)
    out = calibrate_temperature(sample_split, spec, gateway)
    assert out["best_t"] == 1.15
    assert len(out["curve"]) == 1
    assert 0.0 <= out["curve"][0][1] <= 1.0


def test_k_ablation_shape_and_determinism(sample_split, gateway):
    rows = k_ablation(sample_split, (1, 3, 5), gateway, model="gpt3-davinci3", seed=0)
    assert [row["k"] for row in rows] == [1, 3, 5]
    for row in rows:
        assert set(row) == {"k", "mrr", "noun_recall", "verb_recall", "mean_cost"}
        assert 0.0 < row["mrr"] <= 1.0
        assert 0.0 <= row["noun_recall"] <= 1.0
        assert row["mean_cost"] >= 0.0
    assert rows[0]["mean_cost"] > 0.0

    # a second pass is served from cache, so numbers repeat but cost drops to 0
    again = k_ablation(sample_split, (1, 3, 5), gateway, model="gpt3-davinci3", seed=0)
    for row, twin in zip(rows, again):
        assert twin["mrr"] == row["mrr"]
        assert twin["noun_recall"] == row["noun_recall"]
        assert twin["mean_cost"] == 0.0


def test_k_ablation_rejects_bad_grid(sample_split, gateway):
    with pytest.raises(ValueError):
        k_ablation(sample_split, (3, 1), gateway, model="mock")
    with pytest.raises(ValueError):
        k_ablation(sample_split, (0, 2), gateway, model="mock")
