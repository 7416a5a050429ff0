"""Model access: wire client, mock, cache and bounded dispatch."""
from .base import (
    AuthenticationError,
    Backend,
    BackendError,
    ChatRequest,
    ChatResponse,
    DEFAULT_TEMPERATURE,
    MalformedResponseError,
    RetryExhaustedError,
)
from .cache import ResponseCache, cache_key
from .client import ChatClient
from .http import API_KEY_ENV, OpenAIChatBackend
from .mock import (
    EMPTY_CAPTION,
    PALETTE,
    MockBackend,
    MockObject,
    MockScene,
    SimulatedClock,
    SystemClock,
)

__all__ = [
    "API_KEY_ENV",
    "AuthenticationError",
    "Backend",
    "BackendError",
    "ChatClient",
    "ChatRequest",
    "ChatResponse",
    "DEFAULT_TEMPERATURE",
    "EMPTY_CAPTION",
    "MalformedResponseError",
    "MockBackend",
    "MockObject",
    "MockScene",
    "OpenAIChatBackend",
    "PALETTE",
    "ResponseCache",
    "RetryExhaustedError",
    "SimulatedClock",
    "SystemClock",
    "cache_key",
]
