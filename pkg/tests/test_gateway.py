"""Gateway behavior: caching, retries, batching, and cost accounting.

The mock service fixture is session-scoped, so every assertion on call
counts works with deltas rather than absolute numbers.
"""

import pytest

from capcommittee.data import ImageRecord
from capcommittee.gateway import (
    ContextLengthError,
    CostLedger,
    DiskCache,
    EndpointConfig,
    GatewayError,
    MalformedResponse,
    ModelGateway,
    TransportFailure,
    cache_key,
)


IMAGE = ImageRecord(
    image_id="img42", image_uri="images/beach.jpg", references=("a beach",)
)


def test_sample_candidates_shape(gateway):
    cands = gateway.sample_candidates(IMAGE, k=10, temperature=1.15, seed=3)
    assert cands.k == 10 and len(cands.captions) == 10
    assert cands.temperature == 1.15
    assert all(c.source == "sampled" for c in cands.captions)
    assert all(c.gen_params.temperature == 1.15 for c in cands.captions)
    with pytest.raises(ValueError):
        gateway.sample_candidates(IMAGE, k=0, temperature=1.15)
    with pytest.raises(ValueError):
        gateway.sample_candidates(IMAGE, k=5, temperature=0.0)


def test_baseline_uses_beam_search(gateway):
    cap = gateway.baseline_caption(IMAGE, beams=16)
    assert cap.source == "baseline-beam"
    assert cap.gen_params.beams == 16


def test_short_caption_response_is_an_error(gateway, mock_services):
    mock_services.server.short_captions = True
    try:
        with pytest.raises(MalformedResponse):
            gateway.sample_candidates(IMAGE, k=10, temperature=1.15, seed=99)
    finally:
        mock_services.server.short_captions = False


def test_cache_hit_makes_no_network_call(gateway, mock_services):
    first = gateway.sample_candidates(IMAGE, k=5, temperature=1.15, seed=7)
    before = mock_services.calls("/v1/caption")
    second = gateway.sample_candidates(IMAGE, k=5, temperature=1.15, seed=7)
    assert mock_services.calls("/v1/caption") == before
    assert second == first
    # a different seed misses the cache
    gateway.sample_candidates(IMAGE, k=5, temperature=1.15, seed=8)
    assert mock_services.calls("/v1/caption") == before + 1


def test_cached_completion_costs_nothing(gateway, mock_services):
    text = gateway.complete("Describe a beach.", model="gpt3-davinci3", seed=1)
    cost_after_first = gateway.ledger.total_cost
    assert cost_after_first > 0
    before = mock_services.calls("/v1/completions")
    again = gateway.complete("Describe a beach.", model="gpt3-davinci3", seed=1)
    assert again == text
    assert mock_services.calls("/v1/completions") == before
    assert gateway.ledger.total_cost == cost_after_first
    assert gateway.ledger.entries[-1]["prompt_tokens"] == 0
    assert gateway.ledger.entries[-1]["completion_tokens"] == 0


def test_guard_attempt_is_a_distinct_request(gateway, mock_services):
    before = mock_services.calls("/v1/completions")
    gateway.complete("Summarize.", model="mock", seed=0, attempt=0)
    gateway.complete("Summarize.", model="mock", seed=0, attempt=1)
    assert mock_services.calls("/v1/completions") == before + 2


def test_retry_recovers_from_transport_blips(gateway, mock_services):
    srv = mock_services.server
    srv.caption_fail_first = mock_services.calls("/v1/caption") + 1
    try:
        cands = gateway.sample_candidates(IMAGE, k=3, temperature=0.95, seed=21)
        assert len(cands.captions) == 3
    finally:
        srv.caption_fail_first = 0


def test_exhausted_retries_raise_transport_failure(gateway, mock_services):
    srv = mock_services.server
    # gateway fixture allows 2 retries (3 attempts); fail more than that
    srv.caption_fail_first = mock_services.calls("/v1/caption") + 5
    try:
        with pytest.raises(TransportFailure):
            gateway.sample_candidates(IMAGE, k=3, temperature=0.95, seed=22)
    finally:
        srv.caption_fail_first = 0


def test_context_budget_enforced_before_sending(gateway, mock_services):
    before = mock_services.calls("/v1/completions")
    with pytest.raises(ContextLengthError):
        gateway.complete("x" * 5000, model="gpt2-xl")
    assert mock_services.calls("/v1/completions") == before
    with pytest.raises(GatewayError):
        gateway.complete("hello", model="no-such-model")


def test_embed_batching_and_per_item_cache(gateway, mock_services):
    items = [f"caption number {i}" for i in range(1000)]
    before = mock_services.calls("/v1/embed")
    vectors = gateway.embed(items, modality="text")
    # batch_limit is 256, so 1000 misses need exactly 4 requests
    assert mock_services.calls("/v1/embed") == before + 4
    assert len(vectors) == 1000
    assert len({v.dim for v in vectors}) == 1

    again = gateway.embed(items, modality="text")
    assert mock_services.calls("/v1/embed") == before + 4
    assert again == vectors

    # a subset plus one new item needs a single small batch
    gateway.embed(items[:10] + ["something new"], modality="text")
    assert mock_services.calls("/v1/embed") == before + 5


def test_embed_validates_input(gateway):
    with pytest.raises(ValueError):
        gateway.embed([], modality="text")
    with pytest.raises(ValueError):
        gateway.embed(["a"], modality="audio")


def test_per_image_summarization_cost(gateway, mock_services):
    srv = mock_services.server
    srv.usage_prompt_tokens = 495
    srv.usage_completion_tokens = 50
    try:
        ledger = CostLedger()
        gateway.ledger = ledger
        for i in range(1000):
            gateway.complete(
                f"Summarize scene {i}.",
                model="gpt3-davinci3",
                seed=0,
                image_id=f"img{i:04d}",
            )
        # 545 tokens at $0.02/1k on both sides is $0.0109 per image
        per_image = ledger.per_image()
        assert per_image["img0000"] == pytest.approx(0.0109)
        assert ledger.total_cost == pytest.approx(10.90)
    finally:
        srv.usage_prompt_tokens = None
        srv.usage_completion_tokens = None


def test_ledger_rejects_negative_entries():
    ledger = CostLedger()
    with pytest.raises(ValueError):
        ledger.record("llm", "mock", cost=-0.01)


def test_cache_key_sensitivity():
    base = cache_key("caption", "captioner", {"n": 5}, 0)
    assert cache_key("caption", "captioner", {"n": 6}, 0) != base
    assert cache_key("caption", "captioner", {"n": 5}, 1) != base
    assert cache_key("embed", "captioner", {"n": 5}, 0) != base
    assert cache_key("caption", "captioner", {"n": 5}, 0) == base


def test_disk_cache_roundtrip(tmp_path):
    cache = DiskCache(tmp_path / "c")
    key = cache_key("caption", "m", {"a": 1}, None)
    assert cache.get(key) is None
    cache.put(key, {"captions": ["a dog"]})
    assert cache.get(key) == {"captions": ["a dog"]}


def test_from_env(monkeypatch, tmp_path, mock_services):
    monkeypatch.setenv("CC_CAPTIONER_URL", mock_services.url)
    monkeypatch.setenv("CC_LLM_URL", mock_services.url)
    monkeypatch.setenv("CC_EMBED_URL", mock_services.url)
    monkeypatch.setenv("CC_CACHE_DIR", str(tmp_path / "cache"))
    gw = ModelGateway.from_env()
    assert gw.captioner_cfg.base_url == mock_services.url
    assert gw.cache is not None
    cands = gw.sample_candidates(IMAGE, k=2, temperature=1.15, seed=0)
    assert len(cands.captions) == 2

    monkeypatch.delenv("CC_LLM_URL")
    with pytest.raises(GatewayError):
        ModelGateway.from_env(cache_dir=str(tmp_path / "cache")).complete(
            "hi", model="mock"
        )


def test_unconfigured_endpoints_fail_loudly(tmp_path):
    gw = ModelGateway(cache=DiskCache(tmp_path / "c"))
    with pytest.raises(GatewayError):
        gw.sample_candidates(IMAGE, k=2, temperature=1.0)
    with pytest.raises(GatewayError):
        gw.embed(["a"], modality="text")
