from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple

from ..geometry import Region

DEFAULT_TEMPERATURE = 0.2


class BackendError(Exception):
    """Terminal failure talking to a model."""


class AuthenticationError(BackendError):
    pass


class MalformedResponseError(BackendError):
    def __init__(self, message: str, raw: object = None) -> None:
        super().__init__(message)
        self.raw = raw


class RetryExhaustedError(BackendError):
    pass


class TransientError(Exception):
    """Retryable transport failure; never escapes the client."""


@dataclass(frozen=True)
class ChatRequest:
    """One chat turn, optionally carrying a PNG image.

    ``image_id`` and ``regions`` describe what the image depicts in root
    coordinates. They never go on the wire; simulated backends use them to
    look up ground truth.
    """

    model: str
    user_text: str
    system: Optional[str] = None
    image: Optional[bytes] = None
    temperature: float = DEFAULT_TEMPERATURE
    want_logprobs: bool = False
    image_id: Optional[str] = None
    regions: Tuple[Region, ...] = ()

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def image_b64(self) -> Optional[str]:
        if self.image is None:
            return None
        return base64.b64encode(self.image).decode("ascii")

    def to_wire(self) -> dict:
        """OpenAI-compatible chat completions body."""
        messages = []
        if self.system is not None:
            messages.append({"role": "system", "content": self.system})
        if self.image is None:
            messages.append({"role": "user", "content": self.user_text})
        else:
            messages.append({
                "role": "user",
                "content": [
                    {"type": "text", "text": self.user_text},
                    {"type": "image_url",
                     "image_url": {"url": "data:image/png;base64," + self.image_b64()}},
                ],
            })
        body = {"model": self.model, "messages": messages, "temperature": self.temperature}
        if self.want_logprobs:
            body["logprobs"] = True
        return body


@dataclass(frozen=True)
class ChatResponse:
    text: str
    token_logprobs: Optional[List[float]] = field(default=None)

    def __post_init__(self) -> None:
        if self.token_logprobs is not None and any(lp > 0 for lp in self.token_logprobs):
            raise ValueError("log-probabilities must be <= 0")

    def to_json(self) -> dict:
        return {"text": self.text, "token_logprobs": self.token_logprobs}

    @classmethod
    def from_json(cls, data: dict) -> "ChatResponse":
        return cls(text=data["text"], token_logprobs=data.get("token_logprobs"))


class Backend(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...
