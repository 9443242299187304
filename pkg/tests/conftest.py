"""Shared fixtures: a deterministic in-process mock for the captioner, LLM,
embedder, and annotator services, with per-endpoint call counters."""

from __future__ import annotations

import hashlib
import json
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from capcommittee.coverage import RuleAnnotator
from capcommittee.gateway import DiskCache, EndpointConfig, ModelGateway


def deterministic_vector(item: str, dim: int = 8) -> list[float]:
    """Unit-ish vector derived from the item's hash; stable across runs."""
    digest = hashlib.sha256(item.encode()).digest()
    raw = [
        struct.unpack(">i", digest[4 * i : 4 * i + 4])[0] / 2**31
        for i in range(dim)
    ]
    norm = sum(x * x for x in raw) ** 0.5
    return [x / norm for x in raw]


def default_captions(image_uri: str, n: int, temperature, beams) -> list[str]:
    stem = image_uri.rsplit("/", 1)[-1].split(".")[0] or "scene"
    if beams is not None:
        return [f"a photo of a {stem} on a table"]
    return [f"a {stem} sitting near object {i}, possibly outdoors" for i in range(n)]


def default_completion(prompt: str) -> str:
    tag = hashlib.sha256(prompt.encode()).hexdigest()[:6]
    return f"A scene, likely showing item {tag}."


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _reply(self, status: int, obj: dict):
        body = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        server = self.server
        with server.lock:
            server.calls[self.path] = server.calls.get(self.path, 0) + 1

        if self.path == "/v1/caption":
            if server.caption_fail_first and server.calls[self.path] <= server.caption_fail_first:
                self.connection.close()
                return
            captions = default_captions(
                payload["image_uri"], payload["n"], payload.get("temperature"),
                payload.get("beams"),
            )
            if server.short_captions:
                captions = captions[: max(len(captions) - 1, 0)]
            self._reply(200, {"captions": captions})
        elif self.path == "/v1/completions":
            with server.lock:
                text = server.script.pop(0) if server.script else default_completion(payload["prompt"])
            prompt_tokens = server.usage_prompt_tokens or max(len(payload["prompt"]) // 4, 1)
            self._reply(
                200,
                {
                    "choices": [{"text": text}],
                    "usage": {
                        "prompt_tokens": prompt_tokens,
                        "completion_tokens": server.usage_completion_tokens or 12,
                    },
                },
            )
        elif self.path == "/v1/embed":
            vectors = [deterministic_vector(item) for item in payload["items"]]
            self._reply(200, {"vectors": vectors, "dim": 8})
        elif self.path == "/v1/annotate":
            nouns, verbs = RuleAnnotator().annotate(payload["text"])
            self._reply(200, {"nouns": sorted(nouns), "verbs": sorted(verbs)})
        else:
            self._reply(404, {"error": "unknown path"})


class MockServices:
    def __init__(self):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.lock = threading.Lock()
        self.server.calls = {}
        self.server.script = []
        self.server.short_captions = False
        self.server.caption_fail_first = 0
        self.server.usage_prompt_tokens = None
        self.server.usage_completion_tokens = None
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def calls(self, path: str) -> int:
        with self.server.lock:
            return self.server.calls.get(path, 0)

    def total_calls(self) -> int:
        with self.server.lock:
            return sum(self.server.calls.values())

    def set_script(self, responses: list[str]):
        with self.server.lock:
            self.server.script = list(responses)

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture(scope="session")
def mock_services():
    services = MockServices()
    yield services
    services.stop()


@pytest.fixture
def gateway(mock_services, tmp_path):
    cfg = lambda: EndpointConfig(base_url=mock_services.url, max_retries=2, retry_backoff=0.01)
    return ModelGateway(
        captioner=cfg(),
        llm=cfg(),
        embedder=cfg(),
        cache=DiskCache(tmp_path / "cache"),
    )


@pytest.fixture
def sample_split(tmp_path):
    from capcommittee.data import DatasetSplit, ImageRecord

    records = tuple(
        ImageRecord(
            image_id=f"img{i:03d}",
            image_uri=f"images/img{i:03d}.jpg",
            references=(
                f"a dog chases ball {i} in the park",
                f"a brown dog runs after a ball near tree {i}",
            ),
        )
        for i in range(3)
    )
    return DatasetSplit(name="fixture", records=records)
