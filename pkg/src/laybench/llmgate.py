"""Unified gateway to language-model backends.

Three request kinds: chat completion, continuation scoring (token
log-probabilities) and masked-span scoring. The gateway wraps a backend
with retry, bounded parallelism and a content-addressed response cache;
a deterministic mock backend makes every pipeline runnable offline.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import math
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

__all__ = [
    "ChatRequest",
    "ChatResponse",
    "ScoreRequest",
    "ScoreResponse",
    "MaskScoreRequest",
    "MaskScoreResponse",
    "GatewayError",
    "TransportError",
    "AuthError",
    "CapabilityError",
    "RetryPolicy",
    "Gateway",
    "MockBackend",
    "HttpBackend",
    "canonical_request",
    "request_key",
]

API_KEY_ENV = "LAYBENCH_API_KEY"
API_BASE_ENV = "LAYBENCH_API_BASE"


class GatewayError(Exception):
    """Base error for backend communication."""


class TransportError(GatewayError):
    """Network failure or retryable backend status."""


class AuthError(GatewayError):
    """Credential problem; never retried."""


class CapabilityError(GatewayError):
    """The backend cannot serve this request kind."""


@dataclass(frozen=True)
class ChatRequest:
    backend_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("at least one message is required")
        if not (math.isfinite(self.temperature) and self.temperature >= 0.0):
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be > 0")

    @classmethod
    def user(cls, backend_id: str, text: str, **kwargs) -> "ChatRequest":
        """Single user message, no system message."""
        return cls(backend_id=backend_id, messages=(("user", text),), **kwargs)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str  # stop | length | refusal
    token_usage: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.finish_reason not in ("stop", "length", "refusal"):
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")
        if self.finish_reason == "stop" and not self.text:
            raise ValueError("finish_reason=stop requires non-empty text")


@dataclass(frozen=True)
class ScoreRequest:
    backend_id: str
    prefix: str
    continuation: str

    def __post_init__(self):
        if not self.continuation:
            raise ValueError("continuation must be non-empty")


@dataclass(frozen=True)
class ScoreResponse:
    token_logprobs: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for token, lp in self.token_logprobs:
            if not (math.isfinite(lp) and lp <= 0.0):
                raise ValueError(f"logprob for {token!r} must be finite and <= 0, got {lp}")


@dataclass(frozen=True)
class MaskScoreRequest:
    backend_id: str
    text: str
    spans: tuple[tuple[int, int], ...]
    mask_token: str = "[MASK]"

    def __post_init__(self):
        previous_end = -1
        for start, end in sorted(self.spans):
            if not (0 <= start < end <= len(self.text)):
                raise ValueError(f"span [{start}, {end}) outside text")
            if start < previous_end:
                raise ValueError(f"overlapping mask spans at [{start}, {end})")
            previous_end = end


@dataclass(frozen=True)
class MaskScoreResponse:
    span_ce: tuple[float, ...]

    def __post_init__(self):
        for value in self.span_ce:
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"cross entropy must be finite and >= 0, got {value}")


def canonical_request(kind: str, req) -> dict:
    """JSON-safe view of a request, stable across runs."""
    if kind == "chat":
        return {
            "kind": "chat",
            "backend_id": req.backend_id,
            "messages": [[role, text] for role, text in req.messages],
            "temperature": req.temperature,
            "max_output_tokens": req.max_output_tokens,
            "seed": req.seed,
        }
    if kind == "score":
        return {
            "kind": "score",
            "backend_id": req.backend_id,
            "prefix": req.prefix,
            "continuation": req.continuation,
        }
    if kind == "mask":
        return {
            "kind": "mask",
            "backend_id": req.backend_id,
            "text": req.text,
            "spans": [[s, e] for s, e in req.spans],
            "mask_token": req.mask_token,
        }
    raise ValueError(f"unknown request kind {kind!r}")


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_key(kind: str, req) -> str:
    """Content address: SHA-256 of the canonical request JSON."""
    return hashlib.sha256(_canonical_json(canonical_request(kind, req)).encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, req: ChatRequest) -> ChatResponse: ...

    def score_continuation(self, req: ScoreRequest) -> ScoreResponse: ...

    def score_masked(self, req: MaskScoreRequest) -> MaskScoreResponse: ...


# --- deterministic mock -----------------------------------------------------

_MOCK_VOCAB = (
    "the cells in this study show that a simple process can explain how "
    "small changes affect the body over time researchers found new ways to "
    "test these ideas and people may benefit when results are shared widely "
    "because clear language helps everyone understand science better"
).split()

_MARKS_HINT = re.compile(r"\bMarks:\s*$")


def _hash_stream(seed_text: str):
    """Infinite deterministic byte stream keyed by seed_text."""
    counter = 0
    while True:
        block = hashlib.sha256(f"{seed_text}:{counter}".encode("utf-8")).digest()
        yield from block
        counter += 1


def _stream_int(stream, nbytes: int = 4) -> int:
    value = 0
    for _ in range(nbytes):
        value = (value << 8) | next(stream)
    return value


class MockBackend:
    """Offline backend: outputs are a pure function of (request, seed).

    Optional knobs pin specific behaviours for tests: a constant or
    per-span list of mask cross-entropies, scripted chat replies, and
    injected continuation logprobs.
    """

    def __init__(self, seed: int = 0, *,
                 context_window: int = 8192,
                 chat_reply: str | Callable[[ChatRequest], str] | None = None,
                 mask_ce: float | Sequence[float] | None = None,
                 continuation_logprobs: Sequence[float] | None = None):
        self.seed = seed
        self.context_window = context_window
        self._chat_reply = chat_reply
        self._mask_ce = mask_ce
        self._continuation_logprobs = continuation_logprobs

    # Generation is keyed off the full prompt text so that scoring the
    # mock's own completion of a prefix yields the minimum cross entropy.
    def _generated_words(self, prompt: str, count: int) -> list[str]:
        stream = _hash_stream(f"{self.seed}:gen:{prompt}")
        return [_MOCK_VOCAB[_stream_int(stream) % len(_MOCK_VOCAB)] for _ in range(count)]

    def complete(self, req: ChatRequest) -> ChatResponse:
        prompt = "\n".join(text for _, text in req.messages)
        prompt_tokens = len(prompt.split())
        h = _stream_int(_hash_stream(f"{self.seed}:{_canonical_json(canonical_request('chat', req))}"))
        if self._chat_reply is not None:
            text = self._chat_reply(req) if callable(self._chat_reply) else self._chat_reply
            return ChatResponse(text=text, finish_reason="stop",
                                token_usage=(prompt_tokens, len(text.split())))
        if _MARKS_HINT.search(prompt):
            mark = 1 + h % 10
            text = f"Marks: {mark}"
            return ChatResponse(text=text, finish_reason="stop",
                                token_usage=(prompt_tokens, 2))
        n_words = 60 + h % 400
        budget = self.context_window - prompt_tokens
        capped = min(n_words, req.max_output_tokens, max(budget, 0))
        if capped <= 0:
            return ChatResponse(text="", finish_reason="length",
                                token_usage=(prompt_tokens, 0))
        words = self._generated_words(prompt, capped)
        finish = "stop" if capped == n_words else "length"
        return ChatResponse(text=" ".join(words), finish_reason=finish,
                            token_usage=(prompt_tokens, capped))

    def score_continuation(self, req: ScoreRequest) -> ScoreResponse:
        # Tokens keep their trailing whitespace so they re-concatenate to
        # the continuation exactly.
        tokens = re.findall(r"\S+\s*", req.continuation)
        if self._continuation_logprobs is not None:
            injected = list(self._continuation_logprobs)
            if len(injected) != len(tokens):
                raise GatewayError(
                    f"injected logprobs ({len(injected)}) do not cover the "
                    f"continuation tokens ({len(tokens)})")
            return ScoreResponse(tuple(zip(tokens, injected)))
        preferred = self._generated_words(req.prefix, len(tokens))
        pairs = []
        for i, token in enumerate(tokens):
            if token.strip() == preferred[i]:
                lp = -0.05
            else:
                h = _stream_int(_hash_stream(f"{self.seed}:tok:{req.prefix}:{i}:{token}"))
                lp = -0.1 - (h % 1890) / 100.0
            pairs.append((token, lp))
        return ScoreResponse(tuple(pairs))

    def score_masked(self, req: MaskScoreRequest) -> MaskScoreResponse:
        if self._mask_ce is not None:
            if isinstance(self._mask_ce, (int, float)):
                return MaskScoreResponse(tuple(float(self._mask_ce) for _ in req.spans))
            values = list(self._mask_ce)
            if len(values) != len(req.spans):
                raise GatewayError(
                    f"injected mask CE values ({len(values)}) do not cover "
                    f"the spans ({len(req.spans)})")
            return MaskScoreResponse(tuple(float(v) for v in values))
        out = []
        for start, end in req.spans:
            h = _stream_int(_hash_stream(f"{self.seed}:mask:{req.text}:{start}:{end}"))
            out.append(0.5 + (h % 800) / 100.0)
        return MaskScoreResponse(tuple(out))


# --- HTTP backend -----------------------------------------------------------

_TRANSIENT_STATUS = {408, 429, 500, 502, 503, 504}


class HttpBackend:
    """OpenAI-compatible chat/completions plus a bespoke mask-scoring route.

    Continuation scoring needs echo-logprobs support; chat-only deployments
    raise CapabilityError there, as does mask scoring when the endpoint is
    not enabled.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None, *,
                 timeout: float = 60.0,
                 supports_logprobs: bool = False,
                 supports_mask_scoring: bool = False,
                 session: requests.Session | None = None):
        base = base_url or os.environ.get(API_BASE_ENV)
        if not base:
            raise GatewayError(f"no backend base URL; set {API_BASE_ENV} or pass base_url")
        self.base_url = base.rstrip("/")
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self._api_key:
            raise AuthError(f"no API credential; set {API_KEY_ENV}")
        self.timeout = timeout
        self.supports_logprobs = supports_logprobs
        self.supports_mask_scoring = supports_mask_scoring
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        headers = {"Authorization": f"Bearer {self._api_key}"}
        try:
            response = self._session.post(url, json=payload, headers=headers,
                                          timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransportError(f"POST {url}: {exc}") from exc
        if response.status_code in (401, 403):
            raise AuthError(
                f"POST {url}: HTTP {response.status_code}; check {API_KEY_ENV}")
        if response.status_code in _TRANSIENT_STATUS:
            raise TransportError(f"POST {url}: HTTP {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"POST {url}: HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise GatewayError(f"POST {url}: non-JSON response") from exc

    def complete(self, req: ChatRequest) -> ChatResponse:
        payload = {
            "model": req.backend_id,
            "messages": [{"role": role, "content": text} for role, text in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        data = self._post("/v1/chat/completions", payload)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
            reason = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat response: {data!r:.200}") from exc
        finish = {"stop": "stop", "length": "length",
                  "content_filter": "refusal"}.get(reason, "stop")
        if finish == "stop" and not text:
            finish = "refusal"
        usage = data.get("usage", {})
        return ChatResponse(
            text=text, finish_reason=finish,
            token_usage=(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)),
        )

    def score_continuation(self, req: ScoreRequest) -> ScoreResponse:
        if not self.supports_logprobs:
            raise CapabilityError(
                "backend does not expose token log-probabilities; "
                "continuation scoring requires an echo-logprobs endpoint")
        payload = {
            "model": req.backend_id,
            "prompt": req.prefix + req.continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
        }
        data = self._post("/v1/completions", payload)
        try:
            lp = data["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            offsets = lp["text_offset"]
            logprobs = lp["token_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise CapabilityError(f"backend returned no logprobs: {data!r:.200}") from exc
        boundary = len(req.prefix)
        pairs = [(tok, lp_val) for tok, off, lp_val in zip(tokens, offsets, logprobs)
                 if off >= boundary and lp_val is not None]
        return ScoreResponse(tuple((tok, min(float(v), 0.0)) for tok, v in pairs))

    def score_masked(self, req: MaskScoreRequest) -> MaskScoreResponse:
        if not self.supports_mask_scoring:
            raise CapabilityError("backend has no mask-scoring endpoint")
        payload = {
            "text": req.text,
            "mask_token": req.mask_token,
            "spans": [[s, e] for s, e in req.spans],
        }
        data = self._post("/mask_score", payload)
        try:
            values = data["span_ce"]
        except (KeyError, TypeError) as exc:
            raise GatewayError(f"malformed mask_score response: {data!r:.200}") from exc
        if len(values) != len(req.spans):
            raise GatewayError(
                f"mask_score returned {len(values)} values for {len(req.spans)} spans")
        return MaskScoreResponse(tuple(float(v) for v in values))


# --- gateway ----------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 5
    initial_delay: float = 1.0
    backoff_factor: float = 2.0
    jitter: float = 0.1

    def delay(self, attempt: int, rng: random.Random) -> float:
        base = self.initial_delay * (self.backoff_factor ** attempt)
        return base * (1.0 + self.jitter * rng.random())


_RESPONSE_CODECS = {
    "chat": (lambda r: {"text": r.text, "finish_reason": r.finish_reason,
                        "token_usage": list(r.token_usage)},
             lambda d: ChatResponse(d["text"], d["finish_reason"],
                                    tuple(d["token_usage"]))),
    "score": (lambda r: {"token_logprobs": [[t, lp] for t, lp in r.token_logprobs]},
              lambda d: ScoreResponse(tuple((t, lp) for t, lp in d["token_logprobs"]))),
    "mask": (lambda r: {"span_ce": list(r.span_ce)},
             lambda d: MaskScoreResponse(tuple(d["span_ce"]))),
}


class Gateway:
    """Backend wrapper adding cache, retry and an in-flight request limit."""

    def __init__(self, backend: Backend, *,
                 cache_dir: str | Path | None = None,
                 max_parallel: int = 4,
                 retry: RetryPolicy = RetryPolicy(),
                 sleep: Callable[[float], None] = time.sleep):
        if max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        self.backend = backend
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.retry = retry
        self._sleep = sleep
        self._rng = random.Random(0)
        self._slots = threading.BoundedSemaphore(max_parallel)
        self._write_lock = threading.Lock()
        self._inflight: dict[str, threading.Lock] = {}
        self._inflight_guard = threading.Lock()

    def complete(self, req: ChatRequest) -> ChatResponse:
        return self._dispatch("chat", req, self.backend.complete)

    def score_continuation(self, req: ScoreRequest) -> ScoreResponse:
        return self._dispatch("score", req, self.backend.score_continuation)

    def score_masked(self, req: MaskScoreRequest) -> MaskScoreResponse:
        return self._dispatch("mask", req, self.backend.score_masked)

    def _dispatch(self, kind: str, req, call):
        if self.cache_dir is None:
            with self._slots:
                return self._with_retry(call, req)
        key = request_key(kind, req)
        cached = self._cache_read(kind, key)
        if cached is not None:
            return cached
        # Serialize identical concurrent requests so the backend never sees
        # the same canonical request twice.
        with self._keyed(key):
            cached = self._cache_read(kind, key)
            if cached is not None:
                return cached
            with self._slots:
                response = self._with_retry(call, req)
            self._cache_write(kind, key, req, response)
        return response

    @contextlib.contextmanager
    def _keyed(self, key: str):
        with self._inflight_guard:
            lock = self._inflight.setdefault(key, threading.Lock())
        with lock:
            yield

    def _with_retry(self, call, req):
        last: TransportError | None = None
        for attempt in range(self.retry.attempts):
            try:
                return call(req)
            except TransportError as exc:
                last = exc
                if attempt + 1 < self.retry.attempts:
                    self._sleep(self.retry.delay(attempt, self._rng))
        raise TransportError(
            f"backend unavailable after {self.retry.attempts} attempts: {last}"
        ) from last

    def _cache_read(self, kind: str, key: str):
        path = self.cache_dir / f"{key}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            stored = json.load(fh)
        _, decode = _RESPONSE_CODECS[kind]
        return decode(stored["response"])

    def _cache_write(self, kind: str, key: str, req, response) -> None:
        encode, _ = _RESPONSE_CODECS[kind]
        record = {"request": canonical_request(kind, req), "response": encode(response)}
        path = self.cache_dir / f"{key}.json"
        with self._write_lock:
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, path)
