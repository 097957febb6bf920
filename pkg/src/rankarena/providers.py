"""Clients for chat-completion, embedding, and entailment services.

All HTTP clients are cache-first: responses are stored content-addressed on
disk so a warmed cache replays any pipeline bit-identically with zero network
calls. Offline mocks implement the same call signatures.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import requests

log = logging.getLogger(__name__)

ENV_CHAT_URL = "RANKARENA_CHAT_URL"
ENV_CHAT_KEY = "RANKARENA_CHAT_KEY"
ENV_EMBED_URL = "RANKARENA_EMBED_URL"
ENV_NLI_URL = "RANKARENA_NLI_URL"


class ProviderError(RuntimeError):
    """Provider unreachable or persistently failing."""


class ProviderDecodeError(ProviderError):
    """Provider answered, but the body was not in the expected shape."""


class CacheMissError(ProviderError):
    """Offline mode hit a request that is not in the cache."""

    def __init__(self, kind: str, digest: str):
        super().__init__(f"offline cache miss for {kind} request {digest}")
        self.kind = kind
        self.digest = digest


def canonical_json(obj: Any) -> str:
    """Stable serialization: key-sorted, no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ProviderRequest:
    kind: str  # "chat" | "embed" | "nli"
    model: str
    payload: Any
    temperature: float | None = None
    sample_index: int | None = None

    def digest(self) -> str:
        body = canonical_json(
            {
                "kind": self.kind,
                "model": self.model,
                "payload": self.payload,
                "temperature": self.temperature,
                "sample_index": self.sample_index,
            }
        )
        return hashlib.sha256(body.encode("utf-8")).hexdigest()


def cache_key(request: ProviderRequest) -> str:
    return request.digest()


class DiskCache:
    """Content-addressed response store: ``<root>/<kind>/<digest>.json``.

    Writes are atomic (write to a temp file, then rename) so concurrent
    writers never leave a torn entry.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, kind: str, digest: str) -> Path:
        return self.root / kind / f"{digest}.json"

    def get(self, kind: str, digest: str) -> dict | None:
        path = self._path(kind, digest)
        if not path.exists():
            return None
        with path.open(encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, kind: str, digest: str, value: dict) -> None:
        path = self._path(kind, digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(json.dumps(value, sort_keys=True, ensure_ascii=False, indent=1), encoding="utf-8")
        tmp.replace(path)

    def delete(self, kind: str, digest: str) -> bool:
        path = self._path(kind, digest)
        if path.exists():
            path.unlink()
            return True
        return False


class ChatProvider(Protocol):
    model: str

    def complete(self, prompt: str, *, temperature: float = 0.0, sample_index: int = 0) -> str: ...


class Embedder(Protocol):
    def embed(self, text: str) -> list[float]: ...


class NliScorer(Protocol):
    def entail(self, premise: str, hypothesis: str) -> float: ...


# transport(url, body, headers, timeout) -> decoded JSON dict
Transport = Callable[[str, dict, dict, float], dict]


def _default_transport(url: str, body: dict, headers: dict, timeout: float) -> dict:
    resp = requests.post(url, json=body, headers=headers, timeout=timeout)
    if resp.status_code >= 500 or resp.status_code == 429:
        raise ProviderError(f"HTTP {resp.status_code} from {url}")
    if resp.status_code >= 400:
        # client errors will not improve on retry
        raise ProviderDecodeError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProviderDecodeError(f"non-JSON response from {url}") from exc


class _HttpBase:
    def __init__(
        self,
        *,
        url: str | None,
        env_var: str,
        api_key: str | None = None,
        cache: DiskCache | None = None,
        offline: bool = False,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        max_inflight: int = 4,
        transport: Transport | None = None,
    ):
        self._url = url or os.environ.get(env_var, "")
        self._api_key = api_key
        self.cache = cache
        self.offline = offline
        self.max_retries = max(1, max_retries)
        self.backoff = backoff
        self.timeout = timeout
        self._transport = transport or _default_transport
        self._inflight = threading.Semaphore(max(1, max_inflight))

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _post(self, body: dict) -> dict:
        if not self._url:
            raise ProviderError("no endpoint URL configured")
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                with self._inflight:
                    return self._transport(self._url, body, self._headers(), self.timeout)
            except ProviderDecodeError:
                raise
            except (ProviderError, requests.RequestException) as exc:
                last = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        raise ProviderError(f"request failed after {self.max_retries} attempts: {last}")

    def _cached_call(self, request: ProviderRequest, body: dict, decode: Callable[[dict], Any]) -> Any:
        digest = request.digest()
        if self.cache is not None:
            hit = self.cache.get(request.kind, digest)
            if hit is not None:
                return hit["response"]
        if self.offline:
            raise CacheMissError(request.kind, digest)
        raw = self._post(body)
        response = decode(raw)
        if self.cache is not None:
            self.cache.put(
                request.kind,
                digest,
                {
                    "kind": request.kind,
                    "model": request.model,
                    "payload": request.payload,
                    "temperature": request.temperature,
                    "sample_index": request.sample_index,
                    "response": response,
                },
            )
        return response


class HttpChatProvider(_HttpBase):
    """OpenAI-compatible chat completions client with disk cache.

    ``sample_index`` is not sent on the wire; it only distinguishes repeated
    stochastic draws of the same prompt in the cache.
    """

    def __init__(self, model: str, *, url: str | None = None, api_key: str | None = None, **kwargs):
        super().__init__(
            url=url,
            env_var=ENV_CHAT_URL,
            api_key=api_key if api_key is not None else os.environ.get(ENV_CHAT_KEY),
            **kwargs,
        )
        self.model = model

    def complete(self, prompt: str, *, temperature: float = 0.0, sample_index: int = 0) -> str:
        payload = {"messages": [{"role": "user", "content": prompt}]}
        request = ProviderRequest("chat", self.model, payload, temperature, sample_index)
        body = {"model": self.model, "messages": payload["messages"], "temperature": temperature}

        def decode(raw: dict) -> str:
            try:
                text = raw["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderDecodeError(f"unexpected chat response shape: {exc!r}") from exc
            if not isinstance(text, str):
                raise ProviderDecodeError("chat completion content is not a string")
            return text

        return self._cached_call(request, body, decode)


class HttpEmbeddingProvider(_HttpBase):
    """OpenAI-compatible embeddings client with disk cache and dimension check."""

    def __init__(self, model: str, *, url: str | None = None, api_key: str | None = None, **kwargs):
        super().__init__(url=url, env_var=ENV_EMBED_URL, api_key=api_key, **kwargs)
        self.model = model
        self._dim: int | None = None
        self._dim_lock = threading.Lock()

    def embed(self, text: str) -> list[float]:
        payload = {"input": text}
        request = ProviderRequest("embed", self.model, payload)
        body = {"model": self.model, "input": text}

        def decode(raw: dict) -> list[float]:
            try:
                vec = raw["data"][0]["embedding"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderDecodeError(f"unexpected embedding response shape: {exc!r}") from exc
            if not isinstance(vec, list) or not all(isinstance(v, (int, float)) for v in vec):
                raise ProviderDecodeError("embedding is not a numeric vector")
            return [float(v) for v in vec]

        vec = self._cached_call(request, body, decode)
        with self._dim_lock:
            if self._dim is None:
                self._dim = len(vec)
            elif len(vec) != self._dim:
                raise ProviderError(
                    f"embedding dimension mismatch: got {len(vec)}, expected {self._dim}"
                )
        return vec


class HttpNliProvider(_HttpBase):
    """Entailment service client: POST {premise, hypothesis} -> {probability}."""

    def __init__(self, model: str = "nli", *, url: str | None = None, api_key: str | None = None, **kwargs):
        super().__init__(url=url, env_var=ENV_NLI_URL, api_key=api_key, **kwargs)
        self.model = model

    def entail(self, premise: str, hypothesis: str) -> float:
        payload = {"premise": premise, "hypothesis": hypothesis}
        request = ProviderRequest("nli", self.model, payload)
        body = dict(payload)

        def decode(raw: dict) -> float:
            try:
                prob = float(raw["probability"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderDecodeError(f"unexpected NLI response shape: {exc!r}") from exc
            return prob

        prob = self._cached_call(request, body, decode)
        if prob < 0.0 or prob > 1.0:
            log.warning("NLI probability %s out of [0,1]; clamping", prob)
            prob = min(1.0, max(0.0, prob))
        return prob


# ---------------------------------------------------------------------------
# Offline mocks
# ---------------------------------------------------------------------------

_MOCK_WORDS = (
    "insight detail overview update review guide summary analysis context "
    "coverage feature benefit result finding method practice resource example "
    "comparison explanation background highlight takeaway note"
).split()


def _mock_document(prompt: str, temperature: float, sample_index: int) -> str:
    """Deterministic pseudo-document for offline runs.

    Varies with (prompt, temperature, sample_index) so best/worst-of-N
    sampling sees distinct candidates, and echoes the candidate query when
    one appears in the prompt.
    """
    query = ""
    for line in prompt.splitlines():
        marker = "candidate query:"
        lowered = line.lower()
        if marker in lowered:
            query = line[lowered.index(marker) + len(marker):].strip()
            break
    seed_material = canonical_json([prompt, temperature, sample_index])
    rng = random.Random(int(hashlib.sha256(seed_material.encode("utf-8")).hexdigest(), 16))
    body = " ".join(rng.choice(_MOCK_WORDS) for _ in range(12 + rng.randrange(8)))
    prefix = f"{query} " * (1 + sample_index % 3) if query else ""
    return f"{prefix}{body}."


@dataclass
class MockChatProvider:
    """Scripted or derived chat completions, fully offline and deterministic.

    ``responses`` maps exact prompts to canned texts (a list is indexed by
    sample_index); anything else falls through to ``script`` or the default
    pseudo-document generator.
    """

    responses: Mapping[str, Any] = field(default_factory=dict)
    script: Callable[[str, float, int], str] | None = None
    model: str = "mock-chat"
    calls: int = 0

    def complete(self, prompt: str, *, temperature: float = 0.0, sample_index: int = 0) -> str:
        self.calls += 1
        if prompt in self.responses:
            canned = self.responses[prompt]
            if isinstance(canned, (list, tuple)):
                return canned[sample_index % len(canned)]
            return canned
        if self.script is not None:
            return self.script(prompt, temperature, sample_index)
        return _mock_document(prompt, temperature, sample_index)


class HashedBagEmbedder:
    """Bag-of-words vectors with stable hashed term buckets."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        return int(hashlib.sha256(token.encode("utf-8")).hexdigest(), 16) % self.dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in text.lower().split():
            token = token.strip(".,;:!?\"'()[]")
            if token:
                vec[self._bucket(token)] += 1.0
        return vec


@dataclass
class FixedEmbedder:
    """Returns preset vectors per exact text; unknown text is an error."""

    vectors: Mapping[str, Sequence[float]]

    def embed(self, text: str) -> list[float]:
        if text not in self.vectors:
            raise KeyError(f"no fixed embedding for text {text[:40]!r}")
        return [float(v) for v in self.vectors[text]]


@dataclass
class MockNliProvider:
    """Entailment probabilities from a lookup table with a default."""

    default: float = 1.0
    pairs: Mapping[tuple[str, str], float] = field(default_factory=dict)
    by_hypothesis: Mapping[str, float] = field(default_factory=dict)

    def entail(self, premise: str, hypothesis: str) -> float:
        if (premise, hypothesis) in self.pairs:
            prob = self.pairs[(premise, hypothesis)]
        elif hypothesis in self.by_hypothesis:
            prob = self.by_hypothesis[hypothesis]
        else:
            prob = self.default
        return min(1.0, max(0.0, float(prob)))
