"""Client for OpenAI-compatible ``/chat/completions`` endpoints."""
from __future__ import annotations

import logging
import os
import time
from typing import Callable, Optional

import httpx

from .base import (
    AuthenticationError,
    BackendError,
    ChatRequest,
    ChatResponse,
    MalformedResponseError,
    RetryExhaustedError,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "DC2_API_KEY"
RETRY_STATUSES = frozenset({408, 409, 429, 500, 502, 503, 504})


class OpenAIChatBackend:
    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        max_retries: int = 4,
        backoff: float = 1.0,
        max_backoff: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if api_key is None:
            api_key = os.environ.get(API_KEY_ENV)
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def send(self, request: ChatRequest) -> ChatResponse:
        body = request.to_wire()
        attempt = 0
        while True:
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                reason = f"transport error: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise AuthenticationError(f"endpoint rejected credentials ({resp.status_code})")
                if resp.status_code in RETRY_STATUSES:
                    reason = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                else:
                    return parse_completion(resp)
            if attempt >= self.max_retries:
                raise RetryExhaustedError(f"gave up after {attempt + 1} attempts ({reason})")
            delay = min(self.max_backoff, self.backoff * 2 ** attempt)
            log.warning("chat request failed (%s); retrying in %.1fs", reason, delay)
            self._sleep(delay)
            attempt += 1


def parse_completion(resp: httpx.Response) -> ChatResponse:
    try:
        data = resp.json()
    except ValueError:
        raise MalformedResponseError("reply is not JSON", raw=resp.text) from None
    try:
        choice = data["choices"][0]
        text = choice["message"]["content"]
        if not isinstance(text, str):
            raise TypeError("content is not a string")
        logprobs = None
        lp = choice.get("logprobs")
        if lp and lp.get("content") is not None:
            logprobs = [min(0.0, float(tok["logprob"])) for tok in lp["content"]]
    except (KeyError, IndexError, TypeError, AttributeError) as exc:
        raise MalformedResponseError(f"unexpected reply shape: {exc}", raw=data) from None
    return ChatResponse(text=text, token_logprobs=logprobs)
