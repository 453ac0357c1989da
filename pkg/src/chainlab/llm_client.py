"""Minimal client for OpenAI-compatible chat-completions endpoints.

The wire format is the plain chat-completions JSON shape, which all the
gateways we target speak.  Auth tokens are read from an environment
variable (never from config files), transport failures and HTTP 429/5xx
are retried with exponentially capped full-jitter backoff, and other
4xx responses fail immediately so permanent errors do not burn quota.
A malformed 200 body is a protocol error and is never retried.

Field mapping: ``prompt`` becomes the single user message;
``max_output_tokens`` maps to ``max_tokens``; ``seed`` is passed through
when set and silently ignored by providers that do not support it.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass

import httpx

from .errors import ConfigurationError, InvalidInputError, ProtocolError, TransportError

RETRYABLE_STATUSES = frozenset({429}) | frozenset(range(500, 600))

DEFAULT_AUTH_ENV_VAR = "CHAINLAB_API_TOKEN"


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach one chat-completions endpoint."""

    base_url: str
    model_name: str
    auth_env_var: str = DEFAULT_AUTH_ENV_VAR
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if not self.timeout > 0:
            raise ConfigurationError("timeout must be positive")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be non-negative")
        if self.backoff_base < 0:
            raise ConfigurationError("backoff_base must be non-negative")


@dataclass(frozen=True)
class CompletionRequest:
    """One prompt plus decoding parameters as they go on the wire.

    Greedy decoding is encoded upstream as ``temperature=0``.
    """

    prompt: str
    temperature: float = 0.7
    top_p: float = 0.9
    seed: int | None = None
    max_output_tokens: int = 256


@dataclass
class CompletionUsage:
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    total_tokens: int | None = None


@dataclass
class CompletionResult:
    text: str
    attempts: int
    latency_s: float
    usage: CompletionUsage
    system_fingerprint: str | None = None
    request_seed: int | None = None


def serialize_request(cfg: EndpointConfig, req: CompletionRequest) -> bytes:
    """Byte-stable JSON body for a request (stable key order, no whitespace)."""
    payload = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": req.prompt}],
        "temperature": req.temperature,
        "top_p": req.top_p,
        "max_tokens": req.max_output_tokens,
    }
    if req.seed is not None:
        payload["seed"] = req.seed
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


class TokenBucket:
    """Requests-per-minute limiter; callers block until a token is free."""

    def __init__(self, requests_per_minute: float, clock=time.monotonic, sleep=time.sleep):
        if requests_per_minute <= 0:
            raise ConfigurationError("requests_per_minute must be positive")
        self.capacity = float(requests_per_minute)
        self.rate = requests_per_minute / 60.0
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class ChatClient:
    """Shareable client with bounded in-flight requests and optional rate cap."""

    def __init__(self, cfg: EndpointConfig, *, max_in_flight: int = 4,
                 requests_per_minute: float | None = None, transport=None,
                 sleep=time.sleep, clock=time.monotonic, jitter_rng=None):
        self.cfg = cfg
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._bucket = (
            TokenBucket(requests_per_minute, clock=clock, sleep=sleep)
            if requests_per_minute is not None else None
        )
        self._sleep = sleep
        self._clock = clock
        self._jitter = jitter_rng if jitter_rng is not None else random.Random()
        self._client = httpx.Client(timeout=cfg.timeout, transport=transport)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _parse(self, resp: httpx.Response, attempts: int, latency: float,
               seed: int | None) -> CompletionResult:
        excerpt = resp.text[:200]
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"cannot interpret completion body ({exc}): {excerpt!r}") from exc
        if not isinstance(text, str):
            raise ProtocolError(f"completion content is not a string: {excerpt!r}")
        usage_raw = data.get("usage") or {}
        usage = CompletionUsage(
            prompt_tokens=usage_raw.get("prompt_tokens"),
            completion_tokens=usage_raw.get("completion_tokens"),
            total_tokens=usage_raw.get("total_tokens"),
        )
        return CompletionResult(
            text=text,
            attempts=attempts,
            latency_s=latency,
            usage=usage,
            system_fingerprint=data.get("system_fingerprint"),
            request_seed=seed,
        )

    def complete(self, req: CompletionRequest) -> CompletionResult:
        cfg = self.cfg
        token = os.environ.get(cfg.auth_env_var)
        if not token:
            raise ConfigurationError(
                f"auth token not found: set the {cfg.auth_env_var} environment variable"
            )
        if not req.prompt:
            raise InvalidInputError("prompt must be non-empty")
        body = serialize_request(cfg, req)
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}

        start = self._clock()
        attempts = 0
        last_status: int | None = None
        last_error = "transport failure"
        with self._semaphore:
            while True:
                if self._bucket is not None:
                    self._bucket.acquire()
                attempts += 1
                try:
                    resp = self._client.post(url, content=body, headers=headers)
                except httpx.TransportError as exc:
                    last_status = None
                    last_error = f"transport error: {exc}"
                else:
                    status = resp.status_code
                    if status == 200:
                        latency = self._clock() - start
                        return self._parse(resp, attempts, latency, req.seed)
                    if status not in RETRYABLE_STATUSES:
                        raise TransportError(
                            f"HTTP {status} from {url} (not retryable)",
                            status=status, attempts=attempts,
                        )
                    last_status = status
                    last_error = f"HTTP {status}"
                if attempts > cfg.max_retries:
                    raise TransportError(
                        f"retries exhausted after {attempts} attempts; last failure: {last_error}",
                        status=last_status, attempts=attempts,
                    )
                cap = cfg.backoff_base * (2.0 ** (attempts - 1))
                self._sleep(self._jitter.uniform(0.0, cap))


def complete(cfg: EndpointConfig, req: CompletionRequest, **client_kwargs) -> CompletionResult:
    """One-shot convenience wrapper; batch callers should hold a ChatClient."""
    with ChatClient(cfg, **client_kwargs) as client:
        return client.complete(req)
