"""HTTP clients for the three external model services (captioner, LLM,
embedder) with a content-addressed disk cache, retries, and cost accounting.

This is the only module that talks to model services. Wire formats:

- captioner: ``POST /v1/caption`` ``{"image_uri", "n", "temperature",
  "beams", "seed"}`` -> ``{"captions": [...]}`` (one of temperature/beams)
- embedder:  ``POST /v1/embed`` ``{"modality", "items"}`` ->
  ``{"vectors": [[...]], "dim": int}``
- LLM:       ``POST /v1/completions`` (OpenAI-style) ->
  ``{"choices": [{"text": ...}], "usage": {...}}``
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import httpx

from capcommittee.data import Caption, CandidateSet, GenParams, ImageRecord


class GatewayError(RuntimeError):
    pass


class TransportFailure(GatewayError):
    """Request could not be completed after retries."""


class MalformedResponse(GatewayError):
    pass


class ContextLengthError(GatewayError):
    """Prompt exceeded the model's context budget; caller may reduce K."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    max_parallel: int = 4
    batch_limit: int = 256
    retry_backoff: float = 0.2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    """Summarizer registry entry: context budget and per-1k-token pricing."""

    name: str
    context_chars: Optional[int] = None
    prompt_price_per_1k: float = 0.0
    completion_price_per_1k: float = 0.0


# Pluggable summarizer registry. Prices are illustrative defaults for cost
# accounting; override per deployment.
SUMMARIZER_REGISTRY: dict[str, ModelSpec] = {}


def register_model(spec: ModelSpec) -> None:
    SUMMARIZER_REGISTRY[spec.name] = spec


for _spec in [
    ModelSpec("gpt3-ada", 8000, 0.0004, 0.0004),
    ModelSpec("gpt3-babbage", 8000, 0.0005, 0.0005),
    ModelSpec("gpt3-curie", 8000, 0.002, 0.002),
    ModelSpec("gpt3-davinci2", 16000, 0.02, 0.02),
    ModelSpec("gpt3-davinci3", 16000, 0.02, 0.02),
    ModelSpec("gpt-3.5-turbo", 16000, 0.0015, 0.002),
    ModelSpec("gpt4", 32000, 0.03, 0.06),
    ModelSpec("claude", 32000, 0.008, 0.024),
    ModelSpec("koala-13b", 8000),
    ModelSpec("vicuna-13b", 8000),
    ModelSpec("llama-13b", 8000),
    ModelSpec("gpt2-xl", 4000),
    ModelSpec("t5-base", 2000),
    ModelSpec("mock", None),
]:
    register_model(_spec)


def cache_key(kind: str, model: str, payload: dict, seed: Optional[int]) -> str:
    """Content hash over the full request; any payload change changes the key."""
    blob = json.dumps(
        {"kind": kind, "model": model, "payload": payload, "seed": seed},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode()).hexdigest()


class DiskCache:
    """Content-addressed response cache: one JSON blob per key, atomic writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        path = self._path(key)
        if not path.exists():
            return None
        with path.open() as fh:
            return json.load(fh)

    def put(self, key: str, value: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{os.getpid()}-{threading.get_ident()}")
        with tmp.open("w") as fh:
            json.dump(value, fh, sort_keys=True)
        tmp.rename(path)


class CostLedger:
    """Thread-safe token and currency accounting; cached calls cost zero."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries: list[dict] = []

    def record(
        self,
        service: str,
        model: str,
        prompt_tokens: int = 0,
        completion_tokens: int = 0,
        cost: float = 0.0,
        image_id: Optional[str] = None,
    ) -> None:
        if cost < 0 or prompt_tokens < 0 or completion_tokens < 0:
            raise ValueError("ledger entries must be non-negative")
        with self._lock:
            self.entries.append(
                {
                    "service": service,
                    "model": model,
                    "prompt_tokens": prompt_tokens,
                    "completion_tokens": completion_tokens,
                    "cost": cost,
                    "image_id": image_id,
                }
            )

    @property
    def total_cost(self) -> float:
        with self._lock:
            return sum(e["cost"] for e in self.entries)

    @property
    def total_tokens(self) -> int:
        with self._lock:
            return sum(e["prompt_tokens"] + e["completion_tokens"] for e in self.entries)

    def per_image(self) -> dict[str, float]:
        with self._lock:
            out: dict[str, float] = {}
            for e in self.entries:
                if e["image_id"] is not None:
                    out[e["image_id"]] = out.get(e["image_id"], 0.0) + e["cost"]
            return out

    def summary(self) -> dict:
        return {"total_cost": self.total_cost, "total_tokens": self.total_tokens}


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    modality: str  # "text" or "image"

    def __post_init__(self):
        if self.modality not in ("text", "image"):
            raise ValueError(f"unknown modality: {self.modality!r}")

    @property
    def dim(self) -> int:
        return len(self.values)


class ModelGateway:
    """One client per external service, sharing a cache and a cost ledger.

    Retries happen only on transport failure before any response body is
    accepted, so a successful side effect is never duplicated.
    """

    def __init__(
        self,
        captioner: Optional[EndpointConfig] = None,
        llm: Optional[EndpointConfig] = None,
        embedder: Optional[EndpointConfig] = None,
        cache: Optional[DiskCache] = None,
        ledger: Optional[CostLedger] = None,
        clients: Optional[dict[str, httpx.Client]] = None,
    ):
        self.captioner_cfg = captioner
        self.llm_cfg = llm
        self.embedder_cfg = embedder
        self.cache = cache
        self.ledger = ledger or CostLedger()
        self._clients = dict(clients or {})

    @classmethod
    def from_env(cls, cache_dir: Optional[str] = None) -> "ModelGateway":
        """Build from CC_CAPTIONER_URL / CC_LLM_URL / CC_EMBED_URL /
        CC_API_KEY / CC_CACHE_DIR."""
        key = os.environ.get("CC_API_KEY")

        def cfg(var):
            url = os.environ.get(var)
            return EndpointConfig(base_url=url, api_key=key) if url else None

        cache_root = cache_dir or os.environ.get("CC_CACHE_DIR")
        return cls(
            captioner=cfg("CC_CAPTIONER_URL"),
            llm=cfg("CC_LLM_URL"),
            embedder=cfg("CC_EMBED_URL"),
            cache=DiskCache(cache_root) if cache_root else None,
        )

    def _client(self, kind: str, cfg: EndpointConfig) -> httpx.Client:
        if kind not in self._clients:
            headers = {}
            if cfg.api_key:
                headers["Authorization"] = f"Bearer {cfg.api_key}"
            self._clients[kind] = httpx.Client(
                base_url=cfg.base_url, timeout=cfg.timeout, headers=headers
            )
        return self._clients[kind]

    def _post(self, kind: str, cfg: EndpointConfig, path: str, payload: dict) -> dict:
        client = self._client(kind, cfg)
        last_exc: Optional[Exception] = None
        for attempt in range(cfg.max_retries + 1):
            try:
                resp = client.post(path, json=payload)
            except httpx.TransportError as exc:
                last_exc = exc
                if attempt < cfg.max_retries:
                    time.sleep(cfg.retry_backoff * (attempt + 1))
                continue
            if resp.status_code >= 400:
                body = resp.text
                if "context_length" in body or "context length" in body:
                    raise ContextLengthError(body)
                raise GatewayError(f"{kind} returned {resp.status_code}: {body[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"{kind} returned non-JSON body") from exc
        raise TransportFailure(f"{kind} unreachable after {cfg.max_retries + 1} attempts: {last_exc}")

    def _cached_post(self, kind: str, model: str, path: str, cfg, payload: dict, seed) -> tuple[dict, bool]:
        key = cache_key(kind, model, payload, seed)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit, True
        body = self._post(kind, cfg, path, payload)
        if self.cache is not None:
            self.cache.put(key, body)
        return body, False

    # -- captioner ----------------------------------------------------------

    def sample_candidates(
        self, image: ImageRecord, k: int, temperature: float, seed: int = 0
    ) -> CandidateSet:
        """Draw exactly k temperature-sampled captions for one image."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.captioner_cfg is None:
            raise GatewayError("captioner endpoint not configured")
        payload = {
            "image_uri": image.image_uri,
            "n": k,
            "temperature": temperature,
            "beams": None,
            "seed": seed,
        }
        body, _ = self._cached_post(
            "caption", "captioner", "/v1/caption", self.captioner_cfg, payload, seed
        )
        captions = body.get("captions")
        if not isinstance(captions, list):
            raise MalformedResponse("captioner response missing 'captions'")
        if len(captions) < k:
            raise MalformedResponse(
                f"captioner returned {len(captions)} captions, wanted {k}"
            )
        params = GenParams(temperature=temperature, seed=seed)
        return CandidateSet(
            image_id=image.image_id,
            captions=tuple(
                Caption(text=t, source="sampled", gen_params=params)
                for t in captions[:k]
            ),
            temperature=temperature,
            k=k,
        )

    def baseline_caption(self, image: ImageRecord, beams: int = 16, seed: int = 0) -> Caption:
        """Single maximum-likelihood caption via beam search."""
        if beams < 1:
            raise ValueError("beams must be >= 1")
        if self.captioner_cfg is None:
            raise GatewayError("captioner endpoint not configured")
        payload = {
            "image_uri": image.image_uri,
            "n": 1,
            "temperature": None,
            "beams": beams,
            "seed": seed,
        }
        body, _ = self._cached_post(
            "caption", "captioner", "/v1/caption", self.captioner_cfg, payload, seed
        )
        captions = body.get("captions") or []
        if not captions:
            raise MalformedResponse("captioner returned no captions")
        return Caption(
            text=captions[0],
            source="baseline-beam",
            gen_params=GenParams(beams=beams, seed=seed),
        )

    # -- LLM ----------------------------------------------------------------

    def complete(
        self,
        prompt: str,
        model: str,
        max_tokens: int = 256,
        temperature: float = 1.0,
        stop: Optional[Sequence[str]] = None,
        seed: int = 0,
        image_id: Optional[str] = None,
        attempt: int = 0,
    ) -> str:
        """OpenAI-style completion; tokens and cost land in the ledger.

        ``attempt`` participates in the cache key so guard regenerations are
        distinct requests.
        """
        if not prompt:
            raise ValueError("prompt must be non-empty")
        if model not in SUMMARIZER_REGISTRY:
            raise GatewayError(f"model {model!r} not in summarizer registry")
        if self.llm_cfg is None:
            raise GatewayError("LLM endpoint not configured")
        spec = SUMMARIZER_REGISTRY[model]
        if spec.context_chars is not None and len(prompt) > spec.context_chars:
            raise ContextLengthError(
                f"prompt of {len(prompt)} chars exceeds {model} context budget "
                f"of {spec.context_chars}"
            )
        payload = {
            "model": model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
            "stop": list(stop) if stop else None,
            "attempt": attempt,
        }
        body, cached = self._cached_post(
            "completion", model, "/v1/completions", self.llm_cfg, payload, seed
        )
        try:
            text = body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("completion response missing choices[0].text") from exc
        usage = body.get("usage", {})
        prompt_tokens = int(usage.get("prompt_tokens", 0))
        completion_tokens = int(usage.get("completion_tokens", 0))
        cost = 0.0
        if not cached:
            cost = (
                prompt_tokens * spec.prompt_price_per_1k
                + completion_tokens * spec.completion_price_per_1k
            ) / 1000.0
        self.ledger.record(
            "llm",
            model,
            prompt_tokens=0 if cached else prompt_tokens,
            completion_tokens=0 if cached else completion_tokens,
            cost=cost,
            image_id=image_id,
        )
        return text

    # -- embedder -------------------------------------------------------------

    def embed(self, items: Sequence[str], modality: str) -> list[EmbeddingVector]:
        """One vector per item, order-preserving; batched and cached per item."""
        if not items:
            raise ValueError("items must be non-empty")
        if modality not in ("text", "image"):
            raise ValueError(f"unknown modality: {modality!r}")
        if self.embedder_cfg is None:
            raise GatewayError("embedder endpoint not configured")

        results: dict[int, tuple[float, ...]] = {}
        misses: list[int] = []
        keys = [
            cache_key("embed", modality, {"item": item}, None) for item in items
        ]
        if self.cache is not None:
            for i, key in enumerate(keys):
                hit = self.cache.get(key)
                if hit is not None:
                    results[i] = tuple(hit["vector"])
                else:
                    misses.append(i)
        else:
            misses = list(range(len(items)))

        limit = self.embedder_cfg.batch_limit
        for start in range(0, len(misses), limit):
            batch_idx = misses[start : start + limit]
            payload = {"modality": modality, "items": [items[i] for i in batch_idx]}
            body = self._post("embed", self.embedder_cfg, "/v1/embed", payload)
            vectors = body.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch_idx):
                raise MalformedResponse("embedder returned wrong vector count")
            for i, vec in zip(batch_idx, vectors):
                results[i] = tuple(float(x) for x in vec)
                if self.cache is not None:
                    self.cache.put(keys[i], {"vector": list(results[i])})

        dims = {len(v) for v in results.values()}
        if len(dims) != 1:
            raise MalformedResponse(f"inconsistent embedding dims: {sorted(dims)}")
        return [EmbeddingVector(values=results[i], modality=modality) for i in range(len(items))]
