from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from laybench.llmgate import (
    AuthError,
    CapabilityError,
    ChatRequest,
    Gateway,
    HttpBackend,
    MaskScoreRequest,
    MockBackend,
    RetryPolicy,
    ScoreRequest,
    TransportError,
    request_key,
)


class CountingBackend:
    """Test double counting total and concurrent in-flight calls."""

    def __init__(self, inner, delay: float = 0.0):
        self.inner = inner
        self.delay = delay
        self.calls = 0
        self.max_concurrent = 0
        self._concurrent = 0
        self._lock = threading.Lock()

    def _wrap(self, fn, req):
        with self._lock:
            self.calls += 1
            self._concurrent += 1
            self.max_concurrent = max(self.max_concurrent, self._concurrent)
        try:
            if self.delay:
                time.sleep(self.delay)
            return fn(req)
        finally:
            with self._lock:
                self._concurrent -= 1

    def complete(self, req):
        return self._wrap(self.inner.complete, req)

    def score_continuation(self, req):
        return self._wrap(self.inner.score_continuation, req)

    def score_masked(self, req):
        return self._wrap(self.inner.score_masked, req)


class FlakyBackend:
    """Fails the first N calls with a transient error, then delegates."""

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.remaining = failures
        self.calls = 0

    def complete(self, req):
        self.calls += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise TransportError("synthetic outage")
        return self.inner.complete(req)

    def score_continuation(self, req):
        return self.inner.score_continuation(req)

    def score_masked(self, req):
        return self.inner.score_masked(req)


# --- request/response validation --------------------------------------------


def test_chat_request_needs_messages() -> None:
    with pytest.raises(ValueError):
        ChatRequest(backend_id="m", messages=())


def test_chat_request_rejects_bad_temperature() -> None:
    with pytest.raises(ValueError):
        ChatRequest.user("m", "hi", temperature=-1.0)
    with pytest.raises(ValueError):
        ChatRequest.user("m", "hi", temperature=float("nan"))


def test_mask_request_rejects_overlap() -> None:
    with pytest.raises(ValueError):
        MaskScoreRequest(backend_id="m", text="abcdef", spans=((0, 3), (2, 5)))


def test_mask_request_rejects_out_of_range() -> None:
    with pytest.raises(ValueError):
        MaskScoreRequest(backend_id="m", text="ab", spans=((0, 5),))


def test_score_request_rejects_empty_continuation() -> None:
    with pytest.raises(ValueError):
        ScoreRequest(backend_id="m", prefix="p", continuation="")


# --- mock behaviour ----------------------------------------------------------


def test_mock_is_pure_function_of_request_and_seed() -> None:
    req = ChatRequest.user("mock", "some prompt", seed=7)
    a = MockBackend(seed=7).complete(req)
    b = MockBackend(seed=7).complete(req)
    c = MockBackend(seed=8).complete(req)
    assert a == b
    assert a.text != c.text


def test_mock_scores_three_tokens() -> None:
    response = MockBackend(seed=1).score_continuation(
        ScoreRequest(backend_id="m", prefix="p", continuation="one two three"))
    assert len(response.token_logprobs) == 3
    for _, lp in response.token_logprobs:
        assert -20.0 <= lp <= 0.0


def test_mock_tokens_redetokenize_to_continuation() -> None:
    continuation = "alpha  beta\n gamma "
    response = MockBackend(seed=1).score_continuation(
        ScoreRequest(backend_id="m", prefix="p", continuation=continuation))
    assert "".join(tok for tok, _ in response.token_logprobs) == continuation


def test_mock_own_completion_scores_minimal() -> None:
    backend = MockBackend(seed=3)
    prompt = "Write something.\n\nArticle: cells divide"
    generated = backend.complete(ChatRequest.user("m", prompt)).text
    own = backend.score_continuation(
        ScoreRequest(backend_id="m", prefix=prompt, continuation=generated))
    other = backend.score_continuation(
        ScoreRequest(backend_id="m", prefix=prompt,
                     continuation="entirely different words here"))
    mean = lambda resp: sum(lp for _, lp in resp.token_logprobs) / len(resp.token_logprobs)
    assert mean(own) > mean(other)


def test_mock_context_overflow_returns_length() -> None:
    backend = MockBackend(seed=1, context_window=8)
    response = backend.complete(ChatRequest.user("m", "a " * 40))
    assert response.finish_reason == "length"


def test_mock_constant_mask_ce() -> None:
    backend = MockBackend(mask_ce=1.5)
    response = backend.score_masked(MaskScoreRequest(
        backend_id="m", text="abcdefgh", spans=((0, 2), (3, 4), (5, 6), (7, 8))))
    assert response.span_ce == (1.5, 1.5, 1.5, 1.5)


def test_mock_zero_spans() -> None:
    response = MockBackend(mask_ce=1.5).score_masked(
        MaskScoreRequest(backend_id="m", text="abc", spans=()))
    assert response.span_ce == ()


def test_mock_marks_reply_parseable() -> None:
    response = MockBackend(seed=5).complete(
        ChatRequest.user("m", "Rate this.\n\nMarks:"))
    assert response.text.startswith("Marks: ")
    assert 1 <= int(response.text.split()[-1]) <= 10


# --- gateway behaviour -------------------------------------------------------


def test_cache_serves_second_request(tmp_path) -> None:
    counting = CountingBackend(MockBackend(seed=2))
    gateway = Gateway(counting, cache_dir=tmp_path / "cache")
    req = ChatRequest.user("m", "cache me")
    first = gateway.complete(req)
    second = gateway.complete(req)
    assert first == second
    assert counting.calls == 1


def test_cache_files_are_keyed_by_request_hash(tmp_path) -> None:
    gateway = Gateway(MockBackend(seed=2), cache_dir=tmp_path / "cache")
    req = ChatRequest.user("m", "hash me")
    gateway.complete(req)
    expected = tmp_path / "cache" / f"{request_key('chat', req)}.json"
    assert expected.exists()
    stored = json.loads(expected.read_text())
    assert stored["request"]["messages"] == [["user", "hash me"]]


def test_cache_dedupes_concurrent_identical_requests(tmp_path) -> None:
    counting = CountingBackend(MockBackend(seed=2), delay=0.05)
    gateway = Gateway(counting, cache_dir=tmp_path / "cache", max_parallel=8)
    req = ChatRequest.user("m", "race me")
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda _: gateway.complete(req), range(8)))
    assert len({r.text for r in results}) == 1
    assert counting.calls == 1


def test_bounded_parallelism(tmp_path) -> None:
    counting = CountingBackend(MockBackend(seed=2), delay=0.02)
    gateway = Gateway(counting, max_parallel=3)
    requests = [ChatRequest.user("m", f"req {i}") for i in range(12)]
    with ThreadPoolExecutor(max_workers=12) as pool:
        list(pool.map(gateway.complete, requests))
    assert counting.calls == 12
    assert counting.max_concurrent <= 3


def test_retry_recovers_after_transient_failures() -> None:
    sleeps: list[float] = []
    flaky = FlakyBackend(MockBackend(seed=4), failures=2)
    gateway = Gateway(flaky, retry=RetryPolicy(initial_delay=1.0, jitter=0.0),
                      sleep=sleeps.append)
    response = gateway.complete(ChatRequest.user("m", "retry me"))
    assert response.finish_reason == "stop"
    assert flaky.calls == 3
    assert sleeps == [1.0, 2.0]  # exponential backoff


def test_retry_gives_up_after_cap() -> None:
    flaky = FlakyBackend(MockBackend(seed=4), failures=99)
    gateway = Gateway(flaky, retry=RetryPolicy(attempts=3, jitter=0.0),
                      sleep=lambda _: None)
    with pytest.raises(TransportError):
        gateway.complete(ChatRequest.user("m", "always down"))
    assert flaky.calls == 3


# --- HTTP backend against a local fake server -------------------------------


class _FakeHandler(BaseHTTPRequestHandler):
    server_version = "fake"
    behaviours: dict = {}

    def log_message(self, *args):  # silence
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length) or b"{}")
        auth = self.headers.get("Authorization", "")
        if auth != "Bearer good-key":
            self._reply(401, {"error": "bad key"})
            return
        if self.path == "/v1/chat/completions":
            fail_remaining = _FakeHandler.behaviours.get("chat_failures", 0)
            if fail_remaining > 0:
                _FakeHandler.behaviours["chat_failures"] = fail_remaining - 1
                self._reply(503, {"error": "overloaded"})
                return
            self._reply(200, {
                "choices": [{"message": {"content": f"echo:{body['messages'][-1]['content']}"},
                             "finish_reason": "stop"}],
                "usage": {"prompt_tokens": 3, "completion_tokens": 2},
            })
        elif self.path == "/v1/completions":
            prompt = body["prompt"]
            # naive echo-logprobs: one token per whitespace-suffixed piece
            import re
            tokens = re.findall(r"\S+\s*", prompt)
            offsets = []
            pos = 0
            for tok in tokens:
                offsets.append(pos)
                pos += len(tok)
            self._reply(200, {
                "choices": [{"logprobs": {
                    "tokens": tokens,
                    "text_offset": offsets,
                    "token_logprobs": [None] + [-0.5] * (len(tokens) - 1),
                }}],
            })
        elif self.path == "/mask_score":
            self._reply(200, {"span_ce": [1.25 for _ in body["spans"]]})
        else:
            self._reply(404, {"error": "nope"})

    def _reply(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def fake_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _FakeHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _FakeHandler.behaviours = {}
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_http_backend_requires_credentials(monkeypatch) -> None:
    monkeypatch.delenv("LAYBENCH_API_KEY", raising=False)
    with pytest.raises(AuthError) as err:
        HttpBackend(base_url="http://127.0.0.1:1")
    assert "LAYBENCH_API_KEY" in str(err.value)


def test_http_backend_reads_base_from_env(monkeypatch, fake_server) -> None:
    monkeypatch.setenv("LAYBENCH_API_BASE", fake_server)
    monkeypatch.setenv("LAYBENCH_API_KEY", "good-key")
    backend = HttpBackend()
    response = backend.complete(ChatRequest.user("model-x", "ping"))
    assert response.text == "echo:ping"


def test_http_auth_failure_names_env_var(fake_server) -> None:
    backend = HttpBackend(base_url=fake_server, api_key="wrong")
    with pytest.raises(AuthError) as err:
        backend.complete(ChatRequest.user("model-x", "hi"))
    assert "LAYBENCH_API_KEY" in str(err.value)


def test_http_transient_is_retried_by_gateway(fake_server) -> None:
    _FakeHandler.behaviours["chat_failures"] = 2
    backend = HttpBackend(base_url=fake_server, api_key="good-key")
    gateway = Gateway(backend, retry=RetryPolicy(jitter=0.0), sleep=lambda _: None)
    response = gateway.complete(ChatRequest.user("model-x", "flaky"))
    assert response.text == "echo:flaky"


def test_http_chat_only_backend_raises_capability_error(fake_server) -> None:
    backend = HttpBackend(base_url=fake_server, api_key="good-key",
                          supports_logprobs=False)
    with pytest.raises(CapabilityError):
        backend.score_continuation(ScoreRequest("model-x", "p", "c"))
    with pytest.raises(CapabilityError):
        backend.score_masked(MaskScoreRequest("model-x", "text", ((0, 2),)))


def test_http_continuation_scoring_slices_after_prefix(fake_server) -> None:
    backend = HttpBackend(base_url=fake_server, api_key="good-key",
                          supports_logprobs=True)
    response = backend.score_continuation(
        ScoreRequest("model-x", prefix="a b ", continuation="c d"))
    assert [tok.strip() for tok, _ in response.token_logprobs] == ["c", "d"]


def test_http_mask_scoring_roundtrip(fake_server) -> None:
    backend = HttpBackend(base_url=fake_server, api_key="good-key",
                          supports_mask_scoring=True)
    response = backend.score_masked(
        MaskScoreRequest("model-x", "some text here", ((0, 4), (5, 9))))
    assert response.span_ce == (1.25, 1.25)
