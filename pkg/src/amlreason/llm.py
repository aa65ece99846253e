"""Chat-completion client for OpenAI-compatible endpoints, plus an offline stub.

The client sends one stateless request per prompt: a single user message
holding the whole prompt.  Transient failures (timeouts, connection errors,
HTTP 429 and 5xx) are retried with exponential backoff and full jitter.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from .prompt import PromptBundle, extract_test_text
from .serialize import parse_serialized
from .typology import DetectorConfig, PatternMatch, detect, detected_kinds

log = logging.getLogger(__name__)

ENV_API_KEY = "LLM_API_KEY"
ENV_BASE_URL = "LLM_BASE_URL"
ENV_MODEL = "LLM_MODEL"


class LlmError(Exception):
    """Base class for completion failures."""

    def __init__(self, message: str, attempts: int = 0):
        self.attempts = attempts
        super().__init__(message)


class AuthenticationError(LlmError):
    pass


class RateLimitError(LlmError):
    pass


class RequestTimeoutError(LlmError):
    pass


class TransportError(LlmError):
    pass


class MalformedResponseError(LlmError):
    pass


@dataclass(frozen=True)
class LlmConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    api_key: str | None = field(default=None, repr=False)
    temperature: float = 0.0
    max_output_tokens: int = 512
    request_timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    max_concurrency: int = 4
    system_prompt: str | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, env=None, **overrides) -> "LlmConfig":
        """Defaults, overridden by ``LLM_*`` variables, overridden by non-None keywords."""
        env = os.environ if env is None else env
        values = {}
        for key, var in (("api_key", ENV_API_KEY), ("base_url", ENV_BASE_URL), ("model", ENV_MODEL)):
            if env.get(var):
                values[key] = env[var]
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def snapshot(self) -> dict:
        return {"base_url": self.base_url, "model": self.model, "temperature": self.temperature,
                "max_output_tokens": self.max_output_tokens, "request_timeout": self.request_timeout,
                "max_retries": self.max_retries, "max_concurrency": self.max_concurrency}


@dataclass(frozen=True)
class Completion:
    text: str
    latency: float
    token_usage: dict | None = None
    attempts: int = 1


def request_body(prompt_text: str, cfg: LlmConfig) -> dict:
    messages = []
    if cfg.system_prompt:
        messages.append({"role": "system", "content": cfg.system_prompt})
    messages.append({"role": "user", "content": prompt_text})
    return {"model": cfg.model, "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens, "messages": messages}


class ChatClient:
    """Thread-safe client; at most ``max_concurrency`` requests are in flight.

    ``transport`` accepts any ``httpx`` transport, which is how tests script
    failures.  ``sleep`` and ``rng`` are injectable for the same reason.
    """

    def __init__(self, cfg: LlmConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, rng: random.Random | None = None):
        self.cfg = cfg
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        self._http = httpx.Client(base_url=cfg.base_url.rstrip("/") + "/", headers=headers,
                                  timeout=cfg.request_timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(cfg.max_concurrency)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _backoff(self, attempt: int) -> float:
        with self._rng_lock:
            return self._rng.uniform(0, self.cfg.backoff_base * 2 ** attempt)

    def complete(self, prompt: PromptBundle | str) -> Completion:
        text = prompt.text if isinstance(prompt, PromptBundle) else prompt
        body = request_body(text, self.cfg)
        attempts = 0
        last: LlmError | None = None
        started = time.monotonic()
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                delay = self._backoff(attempt - 1)
                log.info("retrying in %.2fs after %s", delay, last)
                self._sleep(delay)
            attempts += 1
            try:
                with self._slots:
                    response = self._http.post("chat/completions", json=body)
            except httpx.TimeoutException as exc:
                last = RequestTimeoutError(f"request timed out: {exc}", attempts)
                continue
            except httpx.TransportError as exc:
                last = TransportError(f"transport failure: {exc}", attempts)
                continue
            status = response.status_code
            if status in (401, 403):
                raise AuthenticationError(f"authentication failed (HTTP {status})", attempts)
            if status == 429:
                last = RateLimitError("rate limited (HTTP 429)", attempts)
                continue
            if status >= 500:
                last = TransportError(f"server error (HTTP {status})", attempts)
                continue
            if status >= 400:
                raise TransportError(f"request rejected (HTTP {status}): {response.text[:200]}", attempts)
            try:
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedResponseError(f"unexpected response shape: {exc!r}", attempts) from None
            if not isinstance(content, str):
                raise MalformedResponseError("message content is not a string", attempts)
            return Completion(content, time.monotonic() - started, payload.get("usage"), attempts)
        last.attempts = attempts
        raise last


def complete(prompt: PromptBundle | str, cfg: LlmConfig, transport: httpx.BaseTransport | None = None) -> Completion:
    """One-shot convenience wrapper around :class:`ChatClient`."""
    with ChatClient(cfg, transport=transport) as client:
        return client.complete(prompt)


# ---------------------------------------------------------------------------
# offline stub

def render_answer(matches: list[PatternMatch]) -> str:
    """Answer-format text for a set of detector matches."""
    if not matches:
        return ("Conclusion: Not Suspicious\n"
                "Explanation: The transfers show no fan, cycle, layered or bipartite structure "
                "under the configured thresholds.\n"
                "Observed Pattern: None\n")
    kinds = detected_kinds(matches)
    notes = []
    for kind in kinds:
        first = next(m for m in matches if m.kind is kind)
        notes.append(f"{kind.value} across {len(first.participants)} accounts "
                     f"({len(first.evidence)} transfers)")
    return ("Conclusion: Suspicious\n"
            f"Explanation: The subgraph contains {'; '.join(notes)}.\n"
            f"Observed Pattern: {', '.join(k.value for k in kinds)}\n")


def stub_complete(prompt: PromptBundle | str, detector: DetectorConfig | None = None) -> Completion:
    """Answer from the rule-based detectors instead of a model.

    The test subgraph is cut out of the prompt, parsed, and run through
    :func:`amlreason.typology.detect`.
    """
    started = time.monotonic()
    text = prompt.text if isinstance(prompt, PromptBundle) else prompt
    sub = parse_serialized(extract_test_text(text))
    answer = render_answer(detect(sub, detector))
    return Completion(answer, time.monotonic() - started, None, 1)


__all__ = ["AuthenticationError", "ChatClient", "Completion", "LlmConfig", "LlmError",
           "MalformedResponseError", "RateLimitError", "RequestTimeoutError", "TransportError",
           "complete", "render_answer", "request_body", "stub_complete"]
