"""Chat-completions client for converter and evaluee endpoints.

Speaks the common POST ``/chat/completions`` wire contract (model, messages,
temperature, max_tokens) against any compatible server. The bearer token is
read from an environment variable and never logged. Samples are drawn as
independent requests; retries with backoff cover transient failures, and an
over-length rejection surfaces as :class:`ContextLengthError` so callers can
record the prompt as unanswerable instead of truncating it.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import List, Optional, Protocol, runtime_checkable

import httpx

from .errors import ContextLengthError, TransportError
from .graph_api import RateLimiter


@dataclass(frozen=True)
class LlmEndpoint:
    """Connection and sampling parameters for one chat endpoint."""

    base_url: str
    model: str
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 1024
    timeout: float = 120.0
    max_retries: int = 3
    retry_wait: float = 1.0
    context_window: Optional[int] = None


@runtime_checkable
class ChatBackend(Protocol):
    """Anything that can answer a prompt; mocks implement this too."""

    def complete(self, prompt: str, *, n: int = 1, temperature: Optional[float] = None) -> List[str]: ...


_CONTEXT_LENGTH_MARKERS = ("context length", "context_length", "maximum context", "too many tokens")


class ChatClient:
    """HTTP :class:`ChatBackend` over a chat-completions server."""

    def __init__(
        self,
        endpoint: LlmEndpoint,
        rate_limiter: Optional[RateLimiter] = None,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.endpoint = endpoint
        self.context_window = endpoint.context_window
        self._limiter = rate_limiter
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(endpoint.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            headers=headers,
            timeout=endpoint.timeout,
            transport=transport,
        )

    def _one_sample(self, prompt: str, temperature: float) -> str:
        payload = {
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.endpoint.max_tokens,
        }
        last_error: Optional[Exception] = None
        for attempt in range(self.endpoint.max_retries + 1):
            if self._limiter is not None:
                self._limiter.acquire()
            try:
                resp = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    body = resp.json()
                    return body["choices"][0]["message"]["content"]
                if resp.status_code == 400:
                    text = resp.text.lower()
                    if any(marker in text for marker in _CONTEXT_LENGTH_MARKERS):
                        raise ContextLengthError(
                            f"endpoint {self.endpoint.model} rejected the prompt as over-length"
                        )
                    raise TransportError(f"endpoint returned 400: {resp.text[:500]}")
                if resp.status_code not in (429, 500, 502, 503, 504):
                    raise TransportError(f"endpoint returned status {resp.status_code}")
                last_error = RuntimeError(f"status {resp.status_code}")
            if attempt < self.endpoint.max_retries:
                time.sleep(min(self.endpoint.retry_wait * 2.0 ** attempt, 30.0))
        raise TransportError(
            f"request failed after {self.endpoint.max_retries + 1} attempts: {last_error}"
        )

    def complete(self, prompt: str, *, n: int = 1, temperature: Optional[float] = None) -> List[str]:
        temp = self.endpoint.temperature if temperature is None else temperature
        return [self._one_sample(prompt, temp) for _ in range(n)]
